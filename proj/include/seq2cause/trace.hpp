#pragma once

#include "seq2cause/core.hpp"
#include "seq2cause/density.hpp"
#include "seq2cause/info.hpp"

namespace s2c {

// Event-to-event discovery on a single sequence. Each candidate pair
// (t_src, t_dst) is scored by a lagged information gain: contexts before
// position c are resampled, mediators strictly between the pair and (in the
// "without" branch) the source itself are re-drawn from a uniform proposal,
// and the divergence of the observed target token's probability decides the
// edge.
struct TraceConfig {
    std::optional<int> context;     // default max(ceil(0.1 L), 20)
    int n_particles = 128;
    std::optional<double> tau;      // default recommended_threshold(vocab)
    bool sparse = false;            // cap source lag at max_lag
    int max_lag = 0;                // required when sparse
    uint64_t seed = 0;
};

int trace_context(int length, const std::optional<int>& override = {});

// Threshold scaling law tau = C / |X| with C = 1.72e-2.
double recommended_threshold(int32_t vocab);

struct CandidatePair {
    int t_src = 0;
    int t_dst = 0;

    bool operator==(const CandidatePair&) const = default;
};

// All (t_src, t_dst) with context <= t_src < t_dst <= length; the sparse
// variant additionally requires t_dst - t_src <= max_lag. Ordered by
// (t_dst, t_src). Counts: full (L-c)(L-c+1)/2, sparse caps each t_dst's
// sources at max_lag.
std::vector<CandidatePair> enumerate_pairs(int length, int context, bool sparse = false,
                                           int max_lag = 0);
long pair_count(int length, int context, bool sparse = false, int max_lag = 0);

// Shared context particles for one sequence (position 0 cls, [1, c) ancestral
// from the estimator's full conditional, >= c observed). Particle l draws
// from stream (seed, "ctx", l); lagged_ig and the discoverers reuse the same
// keying, so standalone scores match in-discovery scores exactly.
std::vector<std::vector<TokenId>> trace_context_particles(const EventSequence& seq,
                                                          const EventDensityEstimator& est,
                                                          int context, int n, uint64_t seed);

// Mean over particles of KL(Bern(p_with) || Bern(p_without)) for the observed
// target token, where p_with keeps the observed source and p_without re-draws
// it from the uniform proposal. Mediator and source draws for particle l come
// from stream (seed, t_src, t_dst, l): mediators in position order, then the
// source replacement.
double lagged_ig(const EventSequence& seq, const CandidatePair& pair,
                 const EventDensityEstimator& est, const TraceConfig& cfg);

// Same contrast scored as |p_with - p_without| averaged over particles; the
// Granger-style baseline sharing the model and RNG streams.
double neural_granger_score(const EventSequence& seq, const CandidatePair& pair,
                            const EventDensityEstimator& est, const TraceConfig& cfg);

struct TraceResult {
    InstanceTimeGraph graph;
    long ci_tests = 0;           // candidate pairs scored
    size_t peak_buffer_bytes = 0;  // particle + scratch buffers
    std::vector<double> scores;  // per pair, enumerate_pairs order
};

// Requires length > context. Edges keep pairs with score >= tau (non-strict).
TraceResult discover_instance(const EventSequence& seq, const EventDensityEstimator& est,
                              const TraceConfig& cfg, int workers = 1);

SummaryGraph discover_summary(const EventSequence& seq, const EventDensityEstimator& est,
                              const TraceConfig& cfg, int workers = 1,
                              SummaryAggregate agg = SummaryAggregate::Max);

// Detectability floor of the mixture corruption (1-alpha)P + alpha U in nats:
// with delta = sqrt(eps/2),
//   floor = 2 delta ln 2 + 2 (1+delta) h_b(delta / (1+delta)),
// h_b the natural-log binary entropy. Requires delta <= 1/2 (eps <= 0.5);
// beyond that the bound leaves its regime and config_error is raised.
double noise_floor(double epsilon);

}  // namespace s2c
