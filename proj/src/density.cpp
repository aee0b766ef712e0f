#include "seq2cause/density.hpp"

#include "seq2cause/rng.hpp"
#include "util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace s2c {

namespace {

// Sequence layout puts cls first; estimators also accept bare histories.
std::span<const TokenId> strip_cls(std::span<const TokenId> prefix, int32_t vocab) {
    if (!prefix.empty() && prefix[0] == vocab) return prefix.subspan(1);
    return prefix;
}

}  // namespace

void ExactOracle::next_into(std::span<const TokenId> prefix, Dist& out) const {
    transition_into(spec_, strip_cls(prefix, spec_.vocab), out);
}

PerturbedOracle::PerturbedOracle(ScmSpec spec, double epsilon, uint64_t calib_seed,
                                 int n_histories, int horizon)
    : exact_(std::move(spec)) {
    if (epsilon < 0.0) throw config_error("epsilon must be nonnegative");
    if (n_histories < 1 || horizon < 1)
        throw config_error("calibration needs n_histories and horizon >= 1");
    if (epsilon == 0.0) return;

    const ScmSpec& s = exact_.spec();
    const int32_t V = s.vocab;
    // Flatten the conditionals seen along sampled trajectories; the mixture
    // KL is a pointwise sum so per-step structure is not needed afterwards.
    std::vector<double> probs;
    probs.reserve(size_t(n_histories) * horizon * V);
    Dist d;
    for (int i = 0; i < n_histories; ++i) {
        Rng rng(stream_key(calib_seed, 10, i));
        std::vector<TokenId> hist;
        for (int t = 0; t < horizon; ++t) {
            size_t lo = hist.size() > size_t(s.memory) ? hist.size() - s.memory : 0;
            transition_into(s, std::span<const TokenId>(hist.data() + lo, hist.size() - lo), d);
            probs.insert(probs.end(), d.begin(), d.end());
            hist.push_back(TokenId(rng.categorical(d)));
        }
    }
    const double steps = double(n_histories) * horizon;
    const double u = 1.0 / V;
    auto mean_kl = [&](double a) {
        double acc = 0.0;
        for (double p : probs)
            if (p > 0.0) acc += p * std::log(p / ((1.0 - a) * p + a * u));
        return acc / steps;
    };
    double max_kl = mean_kl(1.0);
    if (max_kl < epsilon)
        throw config_error("epsilon " + std::to_string(epsilon) +
                           " unreachable; full-uniform corruption only yields " +
                           std::to_string(max_kl));
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = (lo + hi) / 2.0;
        double v = mean_kl(mid);
        if (std::abs(v - epsilon) <= 0.05 * epsilon) {
            alpha_ = mid;
            realized_ = v;
            return;
        }
        (v < epsilon ? lo : hi) = mid;
    }
    throw config_error("corruption calibration failed to converge");
}

void PerturbedOracle::next_into(std::span<const TokenId> prefix, Dist& out) const {
    exact_.next_into(prefix, out);
    if (alpha_ == 0.0) return;
    const double u = alpha_ / vocab_size();
    for (double& p : out) p = (1.0 - alpha_) * p + u;
}

LearnedModel::LearnedModel(int32_t vocab, int memory) : vocab_(vocab), memory_(memory) {
    if (vocab <= 0 || memory <= 0) throw config_error("vocab and memory must be positive");
    params_.assign(size_t(vocab) + size_t(memory) * vocab * vocab, 0.0);
}

void LearnedModel::next_into(std::span<const TokenId> prefix, Dist& out) const {
    auto h = strip_cls(prefix, vocab_);
    out.assign(params_.begin(), params_.begin() + vocab_);
    const int len = int(h.size());
    const int lags = std::min(memory_, len);
    for (int k = 1; k <= lags; ++k) {
        TokenId src = h[len - k];
        if (src < 0 || src >= vocab_)
            throw config_error("history token " + std::to_string(src) + " is not an event id");
        const double* w = params_.data() + vocab_ + (size_t(k - 1) * vocab_ + src) * vocab_;
        for (int32_t v = 0; v < vocab_; ++v) out[v] += w[v];
    }
    detail::softmax_into(out);
}

namespace {

// One full-batch pass; fills grad when non-null and returns the mean
// cross-entropy in nats per predicted token.
double model_pass(const LearnedModel& m, const std::vector<EventSequence>& data,
                  std::vector<double>* grad) {
    const int32_t V = m.vocab_size();
    const int memory = m.markov_order();
    if (grad) grad->assign(m.param_count(), 0.0);
    double acc = 0.0;
    size_t n = 0;
    Dist d;
    for (const auto& seq : data) {
        const int L = seq.length();
        for (int t = 1; t <= L; ++t) {
            TokenId y = seq.tokens[t];
            if (y < 0 || y >= V)
                throw config_error("dataset token " + std::to_string(y) + " is not an event id");
            std::span<const TokenId> h(seq.tokens.data() + 1, size_t(t - 1));
            m.next_into(h, d);
            acc -= std::log(std::max(d[y], 1e-300));
            ++n;
            if (grad) {
                const int len = t - 1;
                const int lags = std::min(memory, len);
                double* g = grad->data();
                for (int32_t v = 0; v < V; ++v) g[v] += d[v];
                g[y] -= 1.0;
                for (int k = 1; k <= lags; ++k) {
                    TokenId src = h[len - k];
                    double* gw = g + V + (size_t(k - 1) * V + src) * V;
                    for (int32_t v = 0; v < V; ++v) gw[v] += d[v];
                    gw[y] -= 1.0;
                }
            }
        }
    }
    if (n == 0) throw config_error("dataset has no predicted tokens");
    if (grad)
        for (double& v : *grad) v /= double(n);
    return acc / double(n);
}

}  // namespace

double LearnedModel::loss(const std::vector<EventSequence>& data) const {
    return model_pass(*this, data, nullptr);
}

std::vector<double> LearnedModel::gradient(const std::vector<EventSequence>& data) const {
    std::vector<double> g;
    model_pass(*this, data, &g);
    return g;
}

TrainResult train_lagged_softmax(const std::vector<EventSequence>& data, int32_t vocab,
                                 const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw config_error("epochs must be >= 1");
    if (cfg.lr <= 0.0) throw config_error("lr must be positive");
    TrainResult r{LearnedModel(vocab, cfg.memory), {}};
    r.loss_trace.reserve(cfg.epochs);
    std::vector<double> g;
    for (int e = 0; e < cfg.epochs; ++e) {
        model_pass(r.model, data, &g);
        auto& p = r.model.params();
        for (size_t i = 0; i < p.size(); ++i) p[i] -= cfg.lr * g[i];
        r.loss_trace.push_back(model_pass(r.model, data, nullptr));
    }
    return r;
}

double oracle_score(double l_ar, double h, double h_max) {
    if (h_max <= h) throw config_error("oracle score needs h_max > h");
    return std::max(0.0, (l_ar - h) / (h_max - h));
}

namespace {

class MgramMemo : public EventDensityEstimator {
public:
    MgramMemo(std::shared_ptr<const EventDensityEstimator> base, int order)
        : base_(std::move(base)), order_(order) {}

    int32_t vocab_size() const override { return base_->vocab_size(); }
    int markov_order() const override { return order_; }

    void next_into(std::span<const TokenId> prefix, Dist& out) const override {
        auto h = strip_cls(prefix, base_->vocab_size());
        if (h.size() > size_t(order_)) h = h.subspan(h.size() - order_);
        std::string key(reinterpret_cast<const char*>(h.data()), h.size() * sizeof(TokenId));
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) {
                out = it->second;
                return;
            }
        }
        base_->next_into(h, out);
        std::lock_guard<std::mutex> lock(mu_);
        if (cache_.size() < kMaxEntries) cache_.emplace(std::move(key), out);
    }

private:
    static constexpr size_t kMaxEntries = size_t(1) << 20;

    std::shared_ptr<const EventDensityEstimator> base_;
    int order_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, Dist> cache_;
};

}  // namespace

std::shared_ptr<const EventDensityEstimator> memoized(
    std::shared_ptr<const EventDensityEstimator> base) {
    if (!base || base->markov_order() < 0) return base;
    return std::make_shared<MgramMemo>(std::move(base), base->markov_order());
}

RolloutPosterior::RolloutPosterior(std::shared_ptr<const EventDensityEstimator> events,
                                   LabelPlan plan, int horizon, int n_rollouts, uint64_t seed,
                                   double eps)
    : events_(std::move(events)),
      plan_(std::move(plan)),
      horizon_(horizon),
      n_rollouts_(n_rollouts),
      seed_(seed),
      eps_(eps) {
    if (!events_) throw config_error("rollout posterior needs an event model");
    if (int(plan_.rules.size()) != plan_.n_labels)
        throw config_error("label plan needs one rule per label");
    if (horizon_ < 1 || n_rollouts_ < 1)
        throw config_error("horizon and n_rollouts must be >= 1");
    if (eps_ <= 0.0 || eps_ >= 0.5) throw config_error("eps must be in (0, 0.5)");
    for (const auto& r : plan_.rules)
        for (TokenId v : r.variables())
            if (v < 0 || v >= events_->vocab_size())
                throw config_error("rule atom x" + std::to_string(v) +
                                   " is outside the vocabulary");
}

void RolloutPosterior::posterior_into(std::span<const TokenId> prefix,
                                      std::vector<double>& out) const {
    const int32_t V = events_->vocab_size();
    auto h0 = strip_cls(prefix, V);
    for (TokenId t : h0)
        if (t < 0 || t >= V)
            throw config_error("prefix token " + std::to_string(t) + " is not an event id");

    std::vector<uint8_t> base_presence(V, 0);
    for (TokenId t : h0) base_presence[t] = 1;

    std::vector<int> counts(plan_.n_labels, 0);
    if (int(h0.size()) >= horizon_) {
        for (int j = 0; j < plan_.n_labels; ++j)
            counts[j] = plan_.rules[j].eval_presence(base_presence) ? n_rollouts_ : 0;
    } else {
        const uint64_t hkey = fnv1a_span(h0);
        std::vector<TokenId> hist;
        std::vector<uint8_t> presence;
        Dist d;
        for (int r = 0; r < n_rollouts_; ++r) {
            Rng rng(stream_key(seed_, hkey, uint64_t(r)));
            hist.assign(h0.begin(), h0.end());
            presence = base_presence;
            for (int t = int(h0.size()); t < horizon_; ++t) {
                events_->next_into(hist, d);
                TokenId x = TokenId(rng.categorical(d));
                hist.push_back(x);
                presence[x] = 1;
            }
            for (int j = 0; j < plan_.n_labels; ++j)
                if (plan_.rules[j].eval_presence(presence)) ++counts[j];
        }
    }
    out.assign(plan_.n_labels, 0.0);
    for (int j = 0; j < plan_.n_labels; ++j)
        out[j] = std::clamp(double(counts[j]) / n_rollouts_, eps_, 1.0 - eps_);
}

struct BridgeEstimator::Child {
    pid_t pid = -1;
    int in_fd = -1;    // parent writes requests here
    FILE* out = nullptr;  // parent reads responses here

    ~Child() {
        if (in_fd >= 0) close(in_fd);
        if (out) fclose(out);
        if (pid > 0) waitpid(pid, nullptr, 0);
    }
};

BridgeEstimator::BridgeEstimator(const std::string& command, int32_t vocab, int n_labels)
    : vocab_(vocab), n_labels_(n_labels), child_(std::make_unique<Child>()) {
    if (vocab <= 0) throw config_error("vocab must be positive");
    if (command.empty()) throw config_error("bridge command is empty");
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
        throw std::runtime_error("bridge: pipe failed");
    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("bridge: fork failed");
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    child_->pid = pid;
    child_->in_fd = to_child[1];
    child_->out = fdopen(from_child[0], "r");
    if (!child_->out) throw std::runtime_error("bridge: fdopen failed");
}

BridgeEstimator::~BridgeEstimator() = default;

std::vector<double> BridgeEstimator::roundtrip(const char* op,
                                               std::span<const TokenId> prefix) const {
    nlohmann::json req = {{"op", op}, {"prefix", std::vector<TokenId>(prefix.begin(), prefix.end())}};
    std::string line = req.dump();
    line.push_back('\n');
    size_t off = 0;
    while (off < line.size()) {
        ssize_t n = write(child_->in_fd, line.data() + off, line.size() - off);
        if (n <= 0) throw std::runtime_error("bridge: child closed its input");
        off += size_t(n);
    }
    char* buf = nullptr;
    size_t cap = 0;
    ssize_t got = getline(&buf, &cap, child_->out);
    std::string resp = got > 0 ? std::string(buf, size_t(got)) : std::string();
    free(buf);
    if (got <= 0) throw std::runtime_error("bridge: child closed its output");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(resp);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("bridge: bad response json: ") + e.what());
    }
    if (j.contains("error"))
        throw std::runtime_error("bridge: child error: " + j["error"].get<std::string>());
    if (!j.contains("probs") || !j["probs"].is_array())
        throw std::runtime_error("bridge: response missing probs");
    return j["probs"].get<std::vector<double>>();
}

void BridgeEstimator::next_into(std::span<const TokenId> prefix, Dist& out) const {
    auto probs = roundtrip("next_dist", prefix);
    if (int32_t(probs.size()) != vocab_)
        throw std::runtime_error("bridge: next_dist returned " + std::to_string(probs.size()) +
                                 " probs, expected " + std::to_string(vocab_));
    out = std::move(probs);
}

void BridgeEstimator::posterior_into(std::span<const TokenId> prefix,
                                     std::vector<double>& out) const {
    if (n_labels_ <= 0) throw config_error("bridge has no labels configured");
    auto probs = roundtrip("label_post", prefix);
    if (int(probs.size()) != n_labels_)
        throw std::runtime_error("bridge: label_post returned " + std::to_string(probs.size()) +
                                 " probs, expected " + std::to_string(n_labels_));
    out = std::move(probs);
}

}  // namespace s2c
