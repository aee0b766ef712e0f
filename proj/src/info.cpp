#include "seq2cause/info.hpp"

#include "util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace s2c {

double binary_kl(double p, double q) {
    p = clamp_prob(p);
    q = clamp_prob(q);
    return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

double categorical_kl(std::span<const double> p, std::span<const double> q, double eps) {
    if (p.size() != q.size() || p.empty())
        throw config_error("kl needs matching nonempty distributions");
    double qs = 0.0;
    for (double v : q) qs += std::max(v, eps);
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        acc += p[i] * std::log(p[i] * qs / std::max(q[i], eps));
    }
    return acc;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

TokenId topk_p_sample(std::span<const double> dist, const SamplingConfig& cfg, Rng& rng) {
    const int n = int(dist.size());
    if (n == 0) throw config_error("cannot sample from an empty distribution");
    std::vector<double> w(dist.begin(), dist.end());
    if (cfg.temperature) {
        double t = *cfg.temperature;
        if (t <= 0.0) throw config_error("temperature must be positive");
        for (double& v : w) v = std::log(std::max(v, 1e-300)) / t;
        detail::softmax_into(w);
    }
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    // stable sort keeps ascending-id order among equal masses
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return w[a] > w[b]; });
    int keep = (cfg.top_k <= 0 || cfg.top_k >= n) ? n : cfg.top_k;
    if (cfg.top_p < 1.0) {
        // nucleus runs on the raw top-k masses, no intermediate renorm
        double cum = 0.0;
        int m = keep;
        for (int i = 0; i < keep; ++i) {
            cum += w[idx[i]];
            if (cum > cfg.top_p) {
                m = i + 1;
                break;
            }
        }
        keep = std::max(1, m);
    }
    double total = 0.0;
    for (int i = 0; i < keep; ++i) total += w[idx[i]];
    if (total <= 0.0) return TokenId(idx[0]);
    double u = rng.unif01();
    double acc = 0.0;
    int last = idx[0];
    for (int i = 0; i < keep; ++i) {
        double pv = w[idx[i]] / total;
        if (pv > 0.0) last = idx[i];
        acc += pv;
        if (u < acc) return TokenId(idx[i]);
    }
    return TokenId(last);
}

std::vector<std::vector<TokenId>> sample_context_particles(const EventSequence& seq,
                                                           const EventDensityEstimator& est,
                                                           int context,
                                                           const SamplingConfig& cfg) {
    validate_sequence(seq, Vocabulary::make(est.vocab_size()));
    const int L = seq.length();
    if (context < 1 || context > L) throw config_error("context must lie in [1, length]");
    if (cfg.n < 1) throw config_error("particle count must be >= 1");
    std::vector<std::vector<TokenId>> parts(cfg.n, seq.tokens);
    Dist d;
    const uint64_t ctx_tag = fnv1a("ctx");
    for (int l = 0; l < cfg.n; ++l) {
        Rng rng(stream_key(cfg.seed, ctx_tag, uint64_t(l)));
        auto& tok = parts[l];
        for (int pos = 1; pos < context; ++pos) {
            est.next_into(std::span<const TokenId>(tok.data(), size_t(pos)), d);
            tok[pos] = topk_p_sample(d, cfg, rng);
        }
    }
    return parts;
}

double cmi_estimate(std::span<const double> p_with, std::span<const double> p_without) {
    if (p_with.size() != p_without.size() || p_with.empty())
        throw config_error("cmi needs matching nonempty particle vectors");
    double acc = 0.0;
    for (size_t l = 0; l < p_with.size(); ++l) acc += binary_kl(p_with[l], p_without[l]);
    return acc / double(p_with.size());
}

double cmi_estimate(const std::vector<Dist>& p_with, const std::vector<Dist>& p_without) {
    if (p_with.size() != p_without.size() || p_with.empty())
        throw config_error("cmi needs matching nonempty particle vectors");
    double acc = 0.0;
    for (size_t l = 0; l < p_with.size(); ++l) acc += categorical_kl(p_with[l], p_without[l]);
    return acc / double(p_with.size());
}

AceResult ace(std::span<const double> p_with, std::span<const double> p_without) {
    if (p_with.size() != p_without.size() || p_with.empty())
        throw config_error("ace needs matching nonempty particle vectors");
    double m = 0.0, m2 = 0.0;
    for (size_t l = 0; l < p_with.size(); ++l) {
        double d = p_with[l] - p_without[l];
        m += d;
        m2 += d * d;
    }
    m /= double(p_with.size());
    m2 /= double(p_with.size());
    double var = m2 - m * m;
    return {m, var > 0.0 ? std::sqrt(var) : 0.0};
}

double pmi(double p_joint, double p_a, double p_b, double delta) {
    if (delta <= 0.0) throw config_error("pmi smoothing must be positive");
    return std::log((p_joint + delta) / ((p_a + delta) * (p_b + delta)));
}

ThresholdResult dynamic_threshold(const CmiSeries& series, double k) {
    if (series.n_rows < 2) throw config_error("dynamic threshold needs at least 2 rows");
    if (series.n_targets < 1) throw config_error("series has no targets");
    if (int(series.values.size()) != series.n_rows * series.n_targets)
        throw config_error("series shape does not match its values");
    ThresholdResult r;
    r.tau.assign(series.n_targets, 0.0);
    r.mask.assign(series.values.size(), 0);
    r.degenerate.assign(series.n_targets, 0);
    for (int t = 0; t < series.n_targets; ++t) {
        double m = 0.0, m2 = 0.0;
        for (int i = 0; i < series.n_rows; ++i) {
            double v = series.at(i, t);
            m += v;
            m2 += v * v;
        }
        m /= series.n_rows;
        m2 /= series.n_rows;
        double var = m2 - m * m;
        double sd = var > 0.0 ? std::sqrt(var) : 0.0;
        r.tau[t] = m + k * sd;
        r.degenerate[t] = sd == 0.0 ? 1 : 0;
        for (int i = 0; i < series.n_rows; ++i)
            // a zero-variance series keeps every row; comparing against the
            // accumulated mean would drop rows on rounding noise alone
            if (r.degenerate[t] || series.at(i, t) >= r.tau[t])
                r.mask[size_t(i) * series.n_targets + t] = 1;
    }
    return r;
}

}  // namespace s2c
