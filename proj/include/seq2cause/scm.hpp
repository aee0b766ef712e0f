#pragma once

#include "seq2cause/core.hpp"

#include <cstdint>
#include <utility>

namespace s2c {

// Autoregressive categorical SCM:
//   P(X_t | X_{t-m..t-1}) = softmax(bias + sum_k decay^k * W[k][x_{t-k}])
// W[k] is |X| x |X| with an exact round(density*|X|^2) count of nonzero
// entries drawn uniform on [-weight_scale, +weight_scale]. Histories shorter
// than m truncate the sum to the available lags.
struct ScmSpec {
    int32_t vocab = 0;
    int memory = 0;
    double density = 0.0;
    double weight_scale = 0.0;
    double decay = 1.0;  // gamma in decay^k
    uint64_t seed = 0;
    std::vector<double> bias;  // size vocab
    // rows[k][src] holds (dst, weight) sorted by dst; k is lag-1 indexed.
    std::vector<std::vector<std::vector<std::pair<TokenId, double>>>> rows;

    Vocabulary vocabulary() const { return Vocabulary::make(vocab); }
    bool has_weight(int lag, TokenId src, TokenId dst) const;  // lag in [1, memory]
    double weight(int lag, TokenId src, TokenId dst) const;
};

// density must be in (0,1]; density == 0 raises config_error.
ScmSpec generate_scm(int32_t vocab, int memory, double density, double weight_scale,
                     double decay, uint64_t seed);

std::string scm_to_json(const ScmSpec& spec);
ScmSpec scm_from_json(const std::string& text);

// history holds event ids, most recent last; only the last min(m,|history|)
// entries participate. Out-of-range ids raise config_error. The result sums
// to 1 within 1e-9.
Dist transition_dist(const ScmSpec& spec, std::span<const TokenId> history);

// In-place variant reusing out's storage.
void transition_into(const ScmSpec& spec, std::span<const TokenId> history, Dist& out);

EventSequence sample_sequence(const ScmSpec& spec, int length, uint64_t seed);
std::vector<EventSequence> sample_dataset(const ScmSpec& spec, int length, int count,
                                          uint64_t seed);

// Type-level interventional ground truth. For every (source u, lag k) the
// source position in a sampled context is forced to u, n_cf counterfactual
// sources are drawn uniformly, and the mean binary KL on each target event's
// next-step probability decides the edge. kept_lags[k-1] is the lag-k
// adjacency; summary is their elementwise OR.
struct GroundTruth {
    int32_t vocab = 0;
    int memory = 0;
    std::vector<AdjacencyMatrix> kept_lags;
    std::vector<std::vector<double>> lag_kl;  // per lag, row-major vocab x vocab
    AdjacencyMatrix summary;                  // elementwise OR over lags

    // Unrolls lag-aware edges onto concrete positions of a sequence; edge
    // strength is the lag's mean divergence.
    InstanceTimeGraph unroll(const EventSequence& seq, int context) const;
};

GroundTruth ground_truth_graph(const ScmSpec& spec, int n_cf = 10, double kl_threshold = 0.05,
                               int n_contexts = 32, uint64_t seed = 0);

// Instance-level interventional ground truth on one observed sequence:
// uniformly re-randomize the source position (n_cf counterfactuals), take the
// mean binary KL between post-intervention and observational distributions of
// the observed target token, edge iff above kl_threshold. Candidate pairs are
// the same (t_src, t_dst) grid the discoverer tests.
InstanceTimeGraph instance_ground_truth(const ScmSpec& spec, const EventSequence& seq,
                                        int context, int n_cf = 10, double kl_threshold = 0.05,
                                        uint64_t seed = 0, int max_lag = 0);

struct EntropyStats {
    double h_cond = 0.0;     // Monte-Carlo mean conditional entropy, nats
    double h_max = 0.0;      // ln vocab
    double redundancy = 0.0; // 1 - h_cond / h_max
};

EntropyStats entropy_stats(const ScmSpec& spec, int n_contexts, int horizon, uint64_t seed);

// Bisects weight_scale until redundancy hits target within tol.
double calibrate_weight_scale(int32_t vocab, int memory, double density, double decay,
                              double target_redundancy, uint64_t seed, double tol = 0.02);

std::vector<LabeledSequence> plant_labels(const std::vector<EventSequence>& data,
                                          const LabelPlan& plan, const Vocabulary& vocab);

}  // namespace s2c
