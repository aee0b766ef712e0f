#pragma once

#include "seq2cause/core.hpp"
#include "seq2cause/scm.hpp"

#include <functional>
#include <memory>

namespace s2c {

// Next-event density over event ids, conditioned on a token prefix. The
// prefix follows sequence layout (leading cls token, then events); a prefix
// without the leading cls is treated as bare history. Implementations must be
// pure: identical prefixes yield identical distributions.
class EventDensityEstimator {
public:
    virtual ~EventDensityEstimator() = default;

    virtual int32_t vocab_size() const = 0;
    virtual void next_into(std::span<const TokenId> prefix, Dist& out) const = 0;

    // Markov order when the conditional only depends on a bounded suffix,
    // -1 when unbounded/unknown. Lets callers memoize safely.
    virtual int markov_order() const { return -1; }

    Dist next_event_dist(std::span<const TokenId> prefix) const {
        Dist d;
        next_into(prefix, d);
        return d;
    }
};

// Per-label posterior P(Y_j = 1 | prefix), clamped to [eps, 1-eps]. Pure in
// the same sense as EventDensityEstimator.
class LabelPosteriorEstimator {
public:
    virtual ~LabelPosteriorEstimator() = default;

    virtual int32_t vocab_size() const = 0;
    virtual int n_labels() const = 0;
    virtual void posterior_into(std::span<const TokenId> prefix, std::vector<double>& out) const = 0;

    std::vector<double> label_posterior(std::span<const TokenId> prefix) const {
        std::vector<double> p;
        posterior_into(prefix, p);
        return p;
    }
};

// Ground-truth conditional of an SCM.
class ExactOracle : public EventDensityEstimator {
public:
    explicit ExactOracle(ScmSpec spec) : spec_(std::move(spec)) {}

    int32_t vocab_size() const override { return spec_.vocab; }
    int markov_order() const override { return spec_.memory; }
    void next_into(std::span<const TokenId> prefix, Dist& out) const override;

    const ScmSpec& spec() const { return spec_; }

private:
    ScmSpec spec_;
};

// Mixture corruption (1-alpha) P + alpha U. alpha is calibrated so the mean
// KL(P || corrupted) over sampled histories matches epsilon within 5%
// relative; unreachable epsilon raises config_error.
class PerturbedOracle : public EventDensityEstimator {
public:
    PerturbedOracle(ScmSpec spec, double epsilon, uint64_t calib_seed = 1,
                    int n_histories = 128, int horizon = 32);

    int32_t vocab_size() const override { return exact_.vocab_size(); }
    int markov_order() const override { return exact_.markov_order(); }
    void next_into(std::span<const TokenId> prefix, Dist& out) const override;

    double alpha() const { return alpha_; }
    double realized_epsilon() const { return realized_; }

private:
    ExactOracle exact_;
    double alpha_ = 0.0;
    double realized_ = 0.0;
};

// Lagged softmax model with dense weights, trained by full-batch gradient
// descent on the cross-entropy of a dataset.
struct TrainConfig {
    int epochs = 200;
    double lr = 0.5;
    int memory = 2;
};

class LearnedModel : public EventDensityEstimator {
public:
    LearnedModel(int32_t vocab, int memory);

    int32_t vocab_size() const override { return vocab_; }
    int markov_order() const override { return memory_; }
    void next_into(std::span<const TokenId> prefix, Dist& out) const override;

    // Mean cross-entropy (nats/token) over the dataset.
    double loss(const std::vector<EventSequence>& data) const;
    // Gradient of loss wrt all parameters, layout [bias | W[0] | W[1] | ...].
    std::vector<double> gradient(const std::vector<EventSequence>& data) const;
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    size_t param_count() const { return params_.size(); }

private:
    int32_t vocab_;
    int memory_;
    std::vector<double> params_;
};

struct TrainResult {
    LearnedModel model;
    std::vector<double> loss_trace;  // one entry per epoch
};

TrainResult train_lagged_softmax(const std::vector<EventSequence>& data, int32_t vocab,
                                 const TrainConfig& cfg);

// Normalized excess log-loss: (l_ar - h) / (h_max - h), clamped below at 0.
// Requires h_max > h.
double oracle_score(double l_ar, double h, double h_max);

// Wraps any estimator in an m-gram memo when markov_order() is bounded;
// otherwise passes through. Semantics-preserving because the wrapped
// conditional only reads the last m tokens.
std::shared_ptr<const EventDensityEstimator> memoized(
    std::shared_ptr<const EventDensityEstimator> base);

// Monte-Carlo label posterior: completes the prefix to `horizon` events with
// ancestral rollouts from the event model and scores each rule on the
// completed sequence. Rollout streams are keyed by (seed, prefix bytes), so
// the posterior is a pure function of the prefix.
class RolloutPosterior : public LabelPosteriorEstimator {
public:
    RolloutPosterior(std::shared_ptr<const EventDensityEstimator> events, LabelPlan plan,
                     int horizon, int n_rollouts = 48, uint64_t seed = 0, double eps = 1e-6);

    int32_t vocab_size() const override { return events_->vocab_size(); }
    int n_labels() const override { return plan_.n_labels; }
    void posterior_into(std::span<const TokenId> prefix, std::vector<double>& out) const override;

private:
    std::shared_ptr<const EventDensityEstimator> events_;
    LabelPlan plan_;
    int horizon_;
    int n_rollouts_;
    uint64_t seed_;
    double eps_;
};

// Line-delimited JSON bridge to a child process:
//   {"op":"next_dist","prefix":[...]}  -> {"probs":[...]}
//   {"op":"label_post","prefix":[...]} -> {"probs":[...]}
// The child is trusted to be pure. Protocol errors raise runtime errors.
class BridgeEstimator : public EventDensityEstimator, public LabelPosteriorEstimator {
public:
    BridgeEstimator(const std::string& command, int32_t vocab, int n_labels = 0);
    ~BridgeEstimator() override;

    int32_t vocab_size() const override { return vocab_; }
    int n_labels() const override { return n_labels_; }
    void next_into(std::span<const TokenId> prefix, Dist& out) const override;
    void posterior_into(std::span<const TokenId> prefix, std::vector<double>& out) const override;

private:
    std::vector<double> roundtrip(const char* op, std::span<const TokenId> prefix) const;

    int32_t vocab_;
    int n_labels_;
    struct Child;
    std::unique_ptr<Child> child_;
};

}  // namespace s2c
