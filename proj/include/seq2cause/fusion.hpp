#pragma once

#include "seq2cause/core.hpp"

#include <functional>
#include <optional>

namespace s2c {

// Population-level fusion of per-sample Markov-boundary graphs.
enum class FusionStrategy { Union, StaticFrequency, Adaptive };

struct FusionConfig {
    FusionStrategy strategy = FusionStrategy::Adaptive;
    double tau = 0.5;                 // static-frequency cutoff
    double tau_max = 0.5;             // adaptive ceiling
    double tau_min = 0.05;            // adaptive floor
    std::optional<double> k_override; // adaptive steepness, computed from
                                      // support quartiles when absent
};

struct EdgeStat {
    int label = 0;
    TokenId event = 0;
    int count = 0;      // graphs containing the edge
    int m_j = 0;        // per-label support
    double freq = 0.0;  // count / m_j
    double mean_cmi = 0.0;
    double mean_ace_mean = 0.0;
    double mean_ace_std = 0.0;
};

struct EdgeStats {
    std::vector<EdgeStat> rows;        // sorted by (label, event)
    std::map<int, int> label_support;  // m_j per label
};

// Support m_j is the number of dataset entries whose label bit j is set when
// labels are supplied, otherwise the number of graphs with >= 1 edge for j.
EdgeStats edge_frequency(const std::vector<MarkovBoundaryGraph>& graphs,
                         const std::vector<std::vector<uint8_t>>* labels = nullptr);

// Logistic-in-log-support threshold:
//   tau(m) = (tau_max - tau_min) / (1 + exp(k (ln m - ln m0))) + tau_min
// with m0 the median support and k = 2 ln 3 / (ln q75 - ln q25) from the
// support quartiles (linear-interpolation quartiles), falling back to k = 1
// when the quartiles coincide. tau(m0) = (tau_max + tau_min + ...)/... sits
// exactly halfway between the bounds.
std::function<double(double)> adaptive_threshold_fn(std::vector<int> supports, double tau_max,
                                                    double tau_min,
                                                    std::optional<double> k_override = {});

// Fused graph: edges kept per strategy (frequency >= tau, non-strict), each
// carrying freq and the mean cmi/ace of its retained occurrences.
MarkovBoundaryGraph fuse(const std::vector<MarkovBoundaryGraph>& graphs, const FusionConfig& cfg,
                         const std::vector<std::vector<uint8_t>>* labels = nullptr);

// CSV columns: label,event,count,m_j,frequency,tau_j,kept
std::string fusion_report_csv(const std::vector<MarkovBoundaryGraph>& graphs,
                              const FusionConfig& cfg,
                              const std::vector<std::vector<uint8_t>>* labels = nullptr);

}  // namespace s2c
