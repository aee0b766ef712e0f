#include "seq2cause/oscar.hpp"

#include "seq2cause/rng.hpp"
#include "util.hpp"

#include <algorithm>
#include <map>

namespace s2c {

OscarResult discover(const EventSequence& seq, const EventDensityEstimator& events,
                     const LabelPosteriorEstimator& labels, const OscarConfig& cfg) {
    if (events.vocab_size() != labels.vocab_size())
        throw config_error("event and label estimators disagree on the vocabulary");
    const int L = seq.length();
    const int c = cfg.context;
    if (c < 1) throw config_error("context must be >= 1");
    if (L < c + 2)
        throw config_error("sequence length " + std::to_string(L) + " is below context + 2");
    const int K = labels.n_labels();

    auto parts = sample_context_particles(seq, events, c, cfg.sampling);
    const int N = int(parts.size());
    const int n_cuts = L - c + 1;  // posterior evaluated after positions c..L

    // posts[l][p - c][j]
    std::vector<std::vector<std::vector<double>>> posts(N);
    for (int l = 0; l < N; ++l) {
        posts[l].resize(n_cuts);
        for (int p = c; p <= L; ++p)
            labels.posterior_into(std::span<const TokenId>(parts[l].data(), size_t(p) + 1),
                                  posts[l][p - c]);
    }

    OscarResult res;
    res.series.context = c;
    res.series.n_rows = L - c;
    res.series.n_targets = K;
    res.series.values.assign(size_t(L - c) * K, 0.0);
    std::vector<AceResult> row_ace(size_t(L - c) * K);

    std::vector<double> pw(N), pwo(N);
    for (int i = c; i < L; ++i) {
        for (int j = 0; j < K; ++j) {
            for (int l = 0; l < N; ++l) {
                pw[l] = posts[l][i + 1 - c][j];
                pwo[l] = posts[l][i - c][j];
            }
            res.series.at(i - c, j) = cmi_estimate(pw, pwo);
            row_ace[size_t(i - c) * K + j] = ace(pw, pwo);
        }
    }

    ThresholdResult thr = dynamic_threshold(res.series, cfg.threshold_k);
    res.tau = thr.tau;
    res.suppressed = thr.degenerate;

    res.graph.n_labels = K;
    for (int j = 0; j < K; ++j) {
        if (thr.degenerate[j]) {
            res.graph.suppressed.push_back(j);
            continue;
        }
        // one edge per suffix event, keeping the strongest position
        std::map<TokenId, MbEdge> best;
        for (int i = c; i < L; ++i) {
            if (!thr.mask[size_t(i - c) * K + j]) continue;
            TokenId ev = seq.tokens[i + 1];
            const AceResult& a = row_ace[size_t(i - c) * K + j];
            MbEdge e{ev, res.series.at(i - c, j), a.mean, a.std, 0.0};
            auto it = best.find(ev);
            if (it == best.end() || e.cmi > it->second.cmi) best[ev] = e;
        }
        if (best.empty()) continue;
        auto& edges = res.graph.parents[j];
        for (auto& [ev, e] : best) edges.push_back(e);
    }
    return res;
}

std::vector<OscarResult> batch_discover(const std::vector<LabeledSequence>& data,
                                        const EventDensityEstimator& events,
                                        const LabelPosteriorEstimator& labels,
                                        const OscarConfig& cfg, int workers) {
    if (workers < 1) throw config_error("workers must be >= 1");
    std::vector<OscarResult> out(data.size());
    detail::parallel_for(int(data.size()), workers, [&](int i) {
        OscarConfig c = cfg;
        c.sampling.seed = mix_key(
            stream_key(cfg.seed),
            fnv1a_span(std::span<const TokenId>(data[i].seq.tokens.data(),
                                                data[i].seq.tokens.size())));
        try {
            out[i] = discover(data[i].seq, events, labels, c);
        } catch (const BatchError&) {
            throw;
        } catch (const std::exception& e) {
            throw BatchError(i, e.what());
        }
    });
    return out;
}

}  // namespace s2c
