#pragma once

#include "seq2cause/core.hpp"
#include "seq2cause/density.hpp"
#include "seq2cause/info.hpp"

namespace s2c {

// Sample-level Markov-boundary discovery over one labeled sequence: resample
// the prefix into context particles, score every label posterior along the
// observed suffix, and flag positions whose consecutive-position divergence
// clears the per-label dynamic threshold.
struct OscarConfig {
    int context = 15;          // c, prefix cutoff
    SamplingConfig sampling;   // defaults n=68, top_k=35, top_p=0.8
    double threshold_k = 2.75;
    uint64_t seed = 0;
};

struct OscarResult {
    MarkovBoundaryGraph graph;
    CmiSeries series;                 // rows are test positions i in [c, L)
    std::vector<double> tau;          // per label
    std::vector<uint8_t> suppressed;  // per label, zero-variance series
};

// Requires seq length >= context + 2 and matching estimator vocabularies;
// violations raise config_error. Edges connect suffix events x_{i+1}
// (positions >= context+1) to labels; one edge per (label, event) keeping the
// maximum-cmi position. Labels whose cmi series has zero variance are
// suppressed from the graph and listed in `suppressed`.
OscarResult discover(const EventSequence& seq, const EventDensityEstimator& events,
                     const LabelPosteriorEstimator& labels, const OscarConfig& cfg);

struct BatchError : std::runtime_error {
    int index;
    BatchError(int i, const std::string& what)
        : std::runtime_error("sequence " + std::to_string(i) + ": " + what), index(i) {}
};

// Per-sequence streams are keyed by token content, so results are
// byte-identical for any worker count and permute with the dataset. Errors
// carry the failing index.
std::vector<OscarResult> batch_discover(const std::vector<LabeledSequence>& data,
                                        const EventDensityEstimator& events,
                                        const LabelPosteriorEstimator& labels,
                                        const OscarConfig& cfg, int workers = 1);

}  // namespace s2c
