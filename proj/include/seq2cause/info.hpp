#pragma once

#include "seq2cause/core.hpp"
#include "seq2cause/density.hpp"
#include "seq2cause/rng.hpp"

#include <cstdint>

namespace s2c {

// Probability clamp shared by every divergence consumer. Estimates are capped
// at ln((1-kEpsC)/kEpsC) ~= 13.8155 nats as a consequence.
inline constexpr double kEpsC = 1e-6;

inline double clamp_prob(double p, double eps = kEpsC) {
    if (p < eps) return eps;
    if (p > 1.0 - eps) return 1.0 - eps;
    return p;
}

// KL between Bernoulli(p) and Bernoulli(q) in nats; inputs are clamped.
double binary_kl(double p, double q);

// KL(p || q) with q floored at eps and renormalized; 0 ln 0 = 0.
double categorical_kl(std::span<const double> p, std::span<const double> q, double eps = kEpsC);

// Shannon entropy in nats.
double entropy(std::span<const double> p);

struct SamplingConfig {
    int n = 68;       // particle count
    int top_k = 35;
    double top_p = 0.8;
    std::optional<double> temperature;
    uint64_t seed = 0;
};

// Top-k truncation followed by nucleus truncation on the raw top-k masses
// (minimal prefix whose cumulative mass exceeds top_p; the top element always
// survives), then renormalize and draw. Ties break toward lower event ids.
// top_k <= 0 or top_k >= |dist| disables the top-k stage; top_p >= 1 disables
// the nucleus stage. Temperature rescales logits before truncation.
TokenId topk_p_sample(std::span<const double> dist, const SamplingConfig& cfg, Rng& rng);

// n particles over the full token layout of seq: position 0 stays cls,
// positions [1, c) are resampled ancestrally from the estimator under the
// sampling config, positions >= c keep the observed tokens. Particle l draws
// from stream (cfg.seed, "ctx", l).
std::vector<std::vector<TokenId>> sample_context_particles(const EventSequence& seq,
                                                           const EventDensityEstimator& est,
                                                           int context,
                                                           const SamplingConfig& cfg);

// Monte-Carlo conditional mutual information for a binary target: mean over
// particles of KL(Bern(p_with[l]) || Bern(p_without[l])).
double cmi_estimate(std::span<const double> p_with, std::span<const double> p_without);

// Categorical variant, used by exhaustive equivalence checks.
double cmi_estimate(const std::vector<Dist>& p_with, const std::vector<Dist>& p_without);

// Average causal effect: mean and population std of p_with - p_without.
struct AceResult {
    double mean = 0.0;
    double std = 0.0;
};
AceResult ace(std::span<const double> p_with, std::span<const double> p_without);

// Pointwise mutual information with additive smoothing.
double pmi(double p_joint, double p_a, double p_b, double delta);

// CMI series for one sample: rows are positions [c, c+n_rows), columns are
// targets (labels).
struct CmiSeries {
    int context = 0;
    int n_rows = 0;
    int n_targets = 0;
    std::vector<double> values;  // row-major

    double at(int row, int target) const { return values[size_t(row) * n_targets + target]; }
    double& at(int row, int target) { return values[size_t(row) * n_targets + target]; }
};

// Per-target tau = mean + k * population std over rows; mask keeps cmi >= tau
// (non-strict). Fewer than 2 rows raises config_error. degenerate[t] marks
// targets whose row std is exactly 0 (their mask is all-true by construction).
struct ThresholdResult {
    std::vector<double> tau;
    std::vector<uint8_t> mask;  // row-major, same shape as the series
    std::vector<uint8_t> degenerate;
};

ThresholdResult dynamic_threshold(const CmiSeries& series, double k = 2.75);

}  // namespace s2c
