#include "seq2cause/trace.hpp"

#include "seq2cause/rng.hpp"
#include "util.hpp"

#include <algorithm>
#include <cmath>

namespace s2c {

int trace_context(int length, const std::optional<int>& override) {
    if (length < 1) throw config_error("length must be >= 1");
    if (override) {
        if (*override < 0) throw config_error("context override must be nonnegative");
        return *override;
    }
    return std::max((length + 9) / 10, 20);
}

double recommended_threshold(int32_t vocab) {
    if (vocab < 2) throw config_error("threshold law needs vocab >= 2");
    return 1.72e-2 / double(vocab);
}

std::vector<CandidatePair> enumerate_pairs(int length, int context, bool sparse, int max_lag) {
    if (context < 0) throw config_error("context must be nonnegative");
    if (context >= length) throw config_error("context must be below the sequence length");
    if (sparse && max_lag < 1) throw config_error("sparse mode needs max_lag >= 1");
    std::vector<CandidatePair> out;
    out.reserve(size_t(pair_count(length, context, sparse, max_lag)));
    for (int d = context + 1; d <= length; ++d) {
        int lo = sparse ? std::max(context, d - max_lag) : context;
        for (int s = lo; s < d; ++s) out.push_back({s, d});
    }
    return out;
}

long pair_count(int length, int context, bool sparse, int max_lag) {
    if (context < 0) throw config_error("context must be nonnegative");
    if (context >= length) throw config_error("context must be below the sequence length");
    if (sparse && max_lag < 1) throw config_error("sparse mode needs max_lag >= 1");
    long n = length - context;
    if (!sparse || max_lag >= n) return n * (n + 1) / 2;
    long m = max_lag;
    return m * (m + 1) / 2 + (n - m) * m;
}

std::vector<std::vector<TokenId>> trace_context_particles(const EventSequence& seq,
                                                          const EventDensityEstimator& est,
                                                          int context, int n, uint64_t seed) {
    validate_sequence(seq, Vocabulary::make(est.vocab_size()));
    const int L = seq.length();
    if (context < 0 || context > L) throw config_error("context must lie in [0, length]");
    if (n < 1) throw config_error("particle count must be >= 1");
    std::vector<std::vector<TokenId>> parts(n, seq.tokens);
    Dist d;
    const uint64_t ctx_tag = fnv1a("ctx");
    for (int l = 0; l < n; ++l) {
        Rng rng(stream_key(seed, ctx_tag, uint64_t(l)));
        auto& tok = parts[l];
        for (int pos = 1; pos < context; ++pos) {
            est.next_into(std::span<const TokenId>(tok.data(), size_t(pos)), d);
            tok[pos] = TokenId(rng.categorical(d));
        }
    }
    return parts;
}

namespace {

struct PairScore {
    double kl = 0.0;
    double granger = 0.0;
};

// Both branches share one stream per (pair, particle): mediators are drawn in
// position order, then the source replacement, so the contrast isolates the
// source and lag > markov window yields bit-identical conditionals.
PairScore score_pair(const EventSequence& seq, const CandidatePair& pair,
                     const EventDensityEstimator& est,
                     const std::vector<std::vector<TokenId>>& parts, uint64_t seed,
                     std::vector<TokenId>& buf, Dist& dw, Dist& dwo) {
    const int32_t V = est.vocab_size();
    const int s = pair.t_src, d = pair.t_dst;
    const TokenId target = seq.tokens[d];
    PairScore acc;
    for (size_t l = 0; l < parts.size(); ++l) {
        Rng rng(stream_key(seed, uint64_t(s), uint64_t(d), uint64_t(l)));
        buf.assign(parts[l].begin(), parts[l].begin() + d);
        for (int p = s + 1; p < d; ++p) buf[p] = TokenId(rng.uniform_int(V));
        TokenId src_cf = TokenId(rng.uniform_int(V));
        est.next_into(buf, dw);
        buf[s] = src_cf;
        est.next_into(buf, dwo);
        double p_with = dw[target];
        double p_without = dwo[target];
        acc.kl += binary_kl(p_with, p_without);
        acc.granger += std::abs(p_with - p_without);
    }
    acc.kl /= double(parts.size());
    acc.granger /= double(parts.size());
    return acc;
}

void check_pair(const CandidatePair& pair, int context, int length) {
    if (pair.t_src < context || pair.t_src >= pair.t_dst || pair.t_dst > length)
        throw config_error("candidate pair (" + std::to_string(pair.t_src) + ", " +
                           std::to_string(pair.t_dst) + ") is not admissible");
}

}  // namespace

double lagged_ig(const EventSequence& seq, const CandidatePair& pair,
                 const EventDensityEstimator& est, const TraceConfig& cfg) {
    const int L = seq.length();
    const int c = trace_context(L, cfg.context);
    check_pair(pair, c, L);
    if (cfg.n_particles < 1) throw config_error("n_particles must be >= 1");
    auto parts = trace_context_particles(seq, est, c, cfg.n_particles, cfg.seed);
    std::vector<TokenId> buf;
    Dist dw, dwo;
    return score_pair(seq, pair, est, parts, cfg.seed, buf, dw, dwo).kl;
}

double neural_granger_score(const EventSequence& seq, const CandidatePair& pair,
                            const EventDensityEstimator& est, const TraceConfig& cfg) {
    const int L = seq.length();
    const int c = trace_context(L, cfg.context);
    check_pair(pair, c, L);
    if (cfg.n_particles < 1) throw config_error("n_particles must be >= 1");
    auto parts = trace_context_particles(seq, est, c, cfg.n_particles, cfg.seed);
    std::vector<TokenId> buf;
    Dist dw, dwo;
    return score_pair(seq, pair, est, parts, cfg.seed, buf, dw, dwo).granger;
}

TraceResult discover_instance(const EventSequence& seq, const EventDensityEstimator& est,
                              const TraceConfig& cfg, int workers) {
    if (workers < 1) throw config_error("workers must be >= 1");
    const int L = seq.length();
    const int c = trace_context(L, cfg.context);
    if (c >= L) throw config_error("context must be below the sequence length");
    if (cfg.sparse && cfg.max_lag < 1) throw config_error("sparse mode needs max_lag >= 1");
    if (cfg.n_particles < 1) throw config_error("n_particles must be >= 1");
    const double tau = cfg.tau ? *cfg.tau : recommended_threshold(est.vocab_size());

    auto parts = trace_context_particles(seq, est, c, cfg.n_particles, cfg.seed);
    auto pairs = enumerate_pairs(L, c, cfg.sparse, cfg.max_lag);

    TraceResult res;
    res.ci_tests = long(pairs.size());
    res.scores.assign(pairs.size(), 0.0);
    const int used = std::max(1, std::min(workers, int(pairs.size())));
    const size_t scratch = size_t(L + 1) * sizeof(TokenId) + 2 * size_t(est.vocab_size()) * 8;
    res.peak_buffer_bytes =
        parts.size() * (size_t(L) + 1) * sizeof(TokenId) + size_t(used) * scratch;

    detail::parallel_for(int(pairs.size()), workers, [&](int i) {
        std::vector<TokenId> buf;
        Dist dw, dwo;
        res.scores[i] = score_pair(seq, pairs[i], est, parts, cfg.seed, buf, dw, dwo).kl;
    });

    res.graph.n_nodes = L + 1;
    for (size_t i = 0; i < pairs.size(); ++i)
        if (res.scores[i] >= tau)
            res.graph.edges.push_back({pairs[i].t_src, pairs[i].t_dst, res.scores[i]});
    std::sort(res.graph.edges.begin(), res.graph.edges.end(),
              [](const TimeEdge& a, const TimeEdge& b) {
                  return a.t_src != b.t_src ? a.t_src < b.t_src : a.t_dst < b.t_dst;
              });
    return res;
}

SummaryGraph discover_summary(const EventSequence& seq, const EventDensityEstimator& est,
                              const TraceConfig& cfg, int workers, SummaryAggregate agg) {
    TraceResult res = discover_instance(seq, est, cfg, workers);
    return project_summary(res.graph, seq, agg);
}

double noise_floor(double epsilon) {
    if (epsilon < 0.0) throw config_error("epsilon must be nonnegative");
    if (epsilon == 0.0) return 0.0;
    double delta = std::sqrt(epsilon / 2.0);
    if (delta > 0.5) throw config_error("noise floor bound needs sqrt(eps/2) <= 1/2");
    double x = delta / (1.0 + delta);
    double hb = -x * std::log(x) - (1.0 - x) * std::log(1.0 - x);
    return 2.0 * delta * std::log(2.0) + 2.0 * (1.0 + delta) * hb;
}

}  // namespace s2c
