#include "seq2cause/scm.hpp"

#include "seq2cause/rng.hpp"
#include "util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "json.hpp"

namespace s2c {

using nlohmann::json;

bool ScmSpec::has_weight(int lag, TokenId src, TokenId dst) const {
    const auto& row = rows[lag - 1][src];
    auto it = std::lower_bound(row.begin(), row.end(), dst,
                               [](const auto& e, TokenId d) { return e.first < d; });
    return it != row.end() && it->first == dst;
}

double ScmSpec::weight(int lag, TokenId src, TokenId dst) const {
    const auto& row = rows[lag - 1][src];
    auto it = std::lower_bound(row.begin(), row.end(), dst,
                               [](const auto& e, TokenId d) { return e.first < d; });
    return it != row.end() && it->first == dst ? it->second : 0.0;
}

ScmSpec generate_scm(int32_t vocab, int memory, double density, double weight_scale, double decay,
                     uint64_t seed) {
    if (vocab <= 0) throw config_error("vocab must be positive");
    if (memory <= 0) throw config_error("memory must be positive");
    if (density <= 0.0 || density > 1.0) throw config_error("density must be in (0, 1]");
    if (weight_scale < 0.0) throw config_error("weight_scale must be nonnegative");
    if (decay <= 0.0) throw config_error("decay must be positive");

    ScmSpec s;
    s.vocab = vocab;
    s.memory = memory;
    s.density = density;
    s.weight_scale = weight_scale;
    s.decay = decay;
    s.seed = seed;
    s.bias.assign(vocab, 0.0);
    s.rows.assign(memory, std::vector<std::vector<std::pair<TokenId, double>>>(vocab));

    const int64_t total = int64_t(vocab) * vocab;
    const int64_t nnz = llround(density * double(total));
    for (int lag = 1; lag <= memory; ++lag) {
        // exact nonzero count per lag matrix: draw distinct cells, then
        // assign weights in ascending-cell order so the result only depends
        // on the selected set
        std::vector<int64_t> cells;
        Rng cell_rng(stream_key(seed, 1, lag));
        if (nnz * 2 >= total) {
            std::vector<int64_t> all(total);
            std::iota(all.begin(), all.end(), 0);
            for (int64_t i = 0; i < nnz; ++i) {
                int64_t j = i + cell_rng.uniform_int(int(total - i));
                std::swap(all[i], all[j]);
            }
            cells.assign(all.begin(), all.begin() + nnz);
        } else {
            std::unordered_set<int64_t> seen;
            while (int64_t(seen.size()) < nnz) {
                int64_t c = int64_t(cell_rng.unif01() * double(total));
                if (c >= total) c = total - 1;
                seen.insert(c);
            }
            cells.assign(seen.begin(), seen.end());
        }
        std::sort(cells.begin(), cells.end());
        Rng w_rng(stream_key(seed, 2, lag));
        for (int64_t c : cells) {
            TokenId src = TokenId(c / vocab);
            TokenId dst = TokenId(c % vocab);
            s.rows[lag - 1][src].push_back({dst, w_rng.uniform(-weight_scale, weight_scale)});
        }
    }
    return s;
}

std::string scm_to_json(const ScmSpec& s) {
    json weights = json::array();
    for (int lag = 1; lag <= s.memory; ++lag) {
        json entries = json::array();
        for (TokenId src = 0; src < s.vocab; ++src)
            for (auto [dst, w] : s.rows[lag - 1][src]) entries.push_back({src, dst, w});
        weights.push_back({{"lag", lag}, {"entries", entries}});
    }
    json j = {{"vocab", s.vocab},     {"memory", s.memory},
              {"density", s.density}, {"weight_scale", s.weight_scale},
              {"decay", s.decay},     {"seed", s.seed},
              {"bias", s.bias},       {"weights", weights}};
    return j.dump();
}

ScmSpec scm_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("bad scm json: ") + e.what());
    }
    ScmSpec s;
    try {
        s.vocab = j.at("vocab").get<int32_t>();
        s.memory = j.at("memory").get<int>();
        s.density = j.value("density", 0.0);
        s.weight_scale = j.value("weight_scale", 0.0);
        s.decay = j.at("decay").get<double>();
        s.seed = j.value("seed", uint64_t(0));
        s.bias = j.at("bias").get<std::vector<double>>();
        if (s.vocab <= 0 || s.memory <= 0 || int(s.bias.size()) != s.vocab)
            throw config_error("inconsistent scm dimensions");
        s.rows.assign(s.memory, std::vector<std::vector<std::pair<TokenId, double>>>(s.vocab));
        for (const auto& lagj : j.at("weights")) {
            int lag = lagj.at("lag").get<int>();
            if (lag < 1 || lag > s.memory) throw config_error("weight lag out of range");
            for (const auto& e : lagj.at("entries")) {
                TokenId src = e.at(0).get<TokenId>();
                TokenId dst = e.at(1).get<TokenId>();
                if (src < 0 || src >= s.vocab || dst < 0 || dst >= s.vocab)
                    throw config_error("weight cell out of range");
                s.rows[lag - 1][src].push_back({dst, e.at(2).get<double>()});
            }
        }
    } catch (const json::exception& e) {
        throw config_error(std::string("bad scm json: ") + e.what());
    }
    for (auto& lag : s.rows)
        for (auto& row : lag) std::sort(row.begin(), row.end());
    return s;
}

Dist transition_dist(const ScmSpec& spec, std::span<const TokenId> history) {
    Dist out;
    transition_into(spec, history, out);
    return out;
}

void transition_into(const ScmSpec& spec, std::span<const TokenId> history, Dist& out) {
    out.assign(spec.bias.begin(), spec.bias.end());
    const int len = int(history.size());
    const int lags = std::min(spec.memory, len);
    double dk = 1.0;
    for (int k = 1; k <= lags; ++k) {
        dk *= spec.decay;
        TokenId src = history[len - k];
        if (src < 0 || src >= spec.vocab)
            throw config_error("history token " + std::to_string(src) + " is not an event id");
        for (auto [dst, w] : spec.rows[k - 1][src]) out[dst] += dk * w;
    }
    // validate the untouched tail too so errors do not depend on memory
    for (int i = 0; i < len - lags; ++i)
        if (history[i] < 0 || history[i] >= spec.vocab)
            throw config_error("history token " + std::to_string(history[i]) +
                               " is not an event id");
    detail::softmax_into(out);
}

EventSequence sample_sequence(const ScmSpec& spec, int length, uint64_t seed) {
    if (length < 1) throw config_error("sequence length must be >= 1");
    Rng rng(stream_key(seed, 3));
    EventSequence seq;
    seq.tokens.reserve(length + 1);
    seq.tokens.push_back(spec.vocab);  // cls
    Dist d;
    std::vector<TokenId> hist;
    hist.reserve(length);
    for (int t = 0; t < length; ++t) {
        size_t lo = hist.size() > size_t(spec.memory) ? hist.size() - spec.memory : 0;
        transition_into(spec, std::span<const TokenId>(hist.data() + lo, hist.size() - lo), d);
        TokenId x = TokenId(rng.categorical(d));
        hist.push_back(x);
        seq.tokens.push_back(x);
    }
    return seq;
}

std::vector<EventSequence> sample_dataset(const ScmSpec& spec, int length, int count,
                                          uint64_t seed) {
    if (count < 0) throw config_error("count must be nonnegative");
    std::vector<EventSequence> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(sample_sequence(spec, length, stream_key(seed, 4, i)));
    return out;
}

namespace {

double bkl(double p, double q) {
    auto cl = [](double v) { return std::min(std::max(v, 1e-12), 1.0 - 1e-12); };
    p = cl(p);
    q = cl(q);
    return p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q));
}

}  // namespace

GroundTruth ground_truth_graph(const ScmSpec& spec, int n_cf, double kl_threshold, int n_contexts,
                               uint64_t seed) {
    if (n_cf < 1 || n_contexts < 1) throw config_error("n_cf and n_contexts must be >= 1");
    GroundTruth gt;
    gt.vocab = spec.vocab;
    gt.memory = spec.memory;
    gt.summary = AdjacencyMatrix::zeros(spec.vocab);
    gt.kept_lags.assign(spec.memory, AdjacencyMatrix::zeros(spec.vocab));
    gt.lag_kl.assign(spec.memory, std::vector<double>(size_t(spec.vocab) * spec.vocab, 0.0));

    // shared contexts: histories of exactly `memory` events
    std::vector<std::vector<TokenId>> contexts(n_contexts);
    Dist d;
    for (int i = 0; i < n_contexts; ++i) {
        Rng rng(stream_key(seed, 5, i));
        auto& h = contexts[i];
        for (int t = 0; t < spec.memory; ++t) {
            transition_into(spec, h, d);
            h.push_back(TokenId(rng.categorical(d)));
        }
    }

    std::vector<TokenId> h;
    Dist obs, cf;
    for (int lag = 1; lag <= spec.memory; ++lag) {
        for (TokenId u = 0; u < spec.vocab; ++u) {
            std::vector<double> acc(spec.vocab, 0.0);
            for (int i = 0; i < n_contexts; ++i) {
                h = contexts[i];
                h[spec.memory - lag] = u;
                transition_into(spec, h, obs);
                Rng rng(stream_key(seed, 6, lag, u, i));
                for (int j = 0; j < n_cf; ++j) {
                    h[spec.memory - lag] = TokenId(rng.uniform_int(spec.vocab));
                    transition_into(spec, h, cf);
                    for (TokenId v = 0; v < spec.vocab; ++v) acc[v] += bkl(cf[v], obs[v]);
                }
            }
            for (TokenId v = 0; v < spec.vocab; ++v) {
                double mean = acc[v] / (double(n_contexts) * n_cf);
                gt.lag_kl[lag - 1][size_t(u) * spec.vocab + v] = mean;
                if (mean > kl_threshold) {
                    gt.kept_lags[lag - 1].at(u, v) = 1;
                    gt.summary.at(u, v) = 1;
                }
            }
        }
    }
    return gt;
}

InstanceTimeGraph GroundTruth::unroll(const EventSequence& seq, int context) const {
    InstanceTimeGraph g;
    g.n_nodes = int(seq.tokens.size());
    const int L = seq.length();
    for (int s = std::max(1, context); s <= L; ++s) {
        for (int lag = 1; lag <= memory && s + lag <= L; ++lag) {
            TokenId u = seq.tokens[s];
            TokenId v = seq.tokens[s + lag];
            if (kept_lags[lag - 1].at(u, v))
                g.edges.push_back({s, s + lag, lag_kl[lag - 1][size_t(u) * vocab + v]});
        }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const TimeEdge& a, const TimeEdge& b) {
        return a.t_src != b.t_src ? a.t_src < b.t_src : a.t_dst < b.t_dst;
    });
    return g;
}

InstanceTimeGraph instance_ground_truth(const ScmSpec& spec, const EventSequence& seq, int context,
                                        int n_cf, double kl_threshold, uint64_t seed, int max_lag) {
    validate_sequence(seq, spec.vocabulary());
    const int L = seq.length();
    if (context < 0 || context >= L) throw config_error("context must lie in [0, length)");
    InstanceTimeGraph g;
    g.n_nodes = L + 1;
    Dist obs, cf;
    std::vector<TokenId> h;
    for (int d = context + 1; d <= L; ++d) {
        int lo = std::max(context, max_lag > 0 ? d - max_lag : context);
        for (int s = lo; s < d; ++s) {
            // observational conditional of the observed target token
            h.assign(seq.tokens.begin() + 1, seq.tokens.begin() + d);
            size_t start = h.size() > size_t(spec.memory) ? h.size() - spec.memory : 0;
            transition_into(spec, std::span<const TokenId>(h.data() + start, h.size() - start),
                            obs);
            double p_obs = obs[seq.tokens[d]];
            Rng rng(stream_key(seed, 7, s, d));
            double acc = 0.0;
            for (int j = 0; j < n_cf; ++j) {
                h[s - 1] = TokenId(rng.uniform_int(spec.vocab));
                transition_into(spec, std::span<const TokenId>(h.data() + start, h.size() - start),
                                cf);
                acc += bkl(cf[seq.tokens[d]], p_obs);
            }
            if (acc / n_cf > kl_threshold) g.edges.push_back({s, d, acc / n_cf});
        }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const TimeEdge& a, const TimeEdge& b) {
        return a.t_src != b.t_src ? a.t_src < b.t_src : a.t_dst < b.t_dst;
    });
    return g;
}

EntropyStats entropy_stats(const ScmSpec& spec, int n_contexts, int horizon, uint64_t seed) {
    if (n_contexts < 1 || horizon < 1) throw config_error("n_contexts and horizon must be >= 1");
    double h_sum = 0.0;
    Dist d;
    for (int i = 0; i < n_contexts; ++i) {
        Rng rng(stream_key(seed, 8, i));
        std::vector<TokenId> hist;
        for (int t = 0; t < horizon; ++t) {
            size_t lo = hist.size() > size_t(spec.memory) ? hist.size() - spec.memory : 0;
            transition_into(spec, std::span<const TokenId>(hist.data() + lo, hist.size() - lo), d);
            double h = 0.0;
            for (double p : d)
                if (p > 0) h -= p * std::log(p);
            h_sum += h;
            hist.push_back(TokenId(rng.categorical(d)));
        }
    }
    EntropyStats st;
    st.h_cond = h_sum / (double(n_contexts) * horizon);
    st.h_max = std::log(double(spec.vocab));
    st.redundancy = 1.0 - st.h_cond / st.h_max;
    return st;
}

double calibrate_weight_scale(int32_t vocab, int memory, double density, double decay,
                              double target_redundancy, uint64_t seed, double tol) {
    if (target_redundancy < 0.0 || target_redundancy >= 1.0)
        throw config_error("target redundancy must be in [0, 1)");
    auto redundancy_at = [&](double scale) {
        ScmSpec s = generate_scm(vocab, memory, density, scale, decay, seed);
        return entropy_stats(s, 48, 32, stream_key(seed, 9)).redundancy;
    };
    if (target_redundancy == 0.0) return 0.0;
    double lo = 0.0, hi = 4.0;
    double r_hi = redundancy_at(hi);
    while (r_hi < target_redundancy && hi < 512.0) {
        hi *= 2.0;
        r_hi = redundancy_at(hi);
    }
    if (r_hi < target_redundancy)
        throw config_error("target redundancy unreachable for this scm family");
    for (int it = 0; it < 40; ++it) {
        double mid = (lo + hi) / 2.0;
        double r = redundancy_at(mid);
        if (std::abs(r - target_redundancy) <= tol) return mid;
        (r < target_redundancy ? lo : hi) = mid;
    }
    return (lo + hi) / 2.0;
}

std::vector<LabeledSequence> plant_labels(const std::vector<EventSequence>& data,
                                          const LabelPlan& plan, const Vocabulary& vocab) {
    if (int(plan.rules.size()) != plan.n_labels)
        throw config_error("label plan needs one rule per label");
    for (const auto& r : plan.rules)
        for (TokenId v : r.variables())
            if (!vocab.valid_event(v))
                throw config_error("rule atom x" + std::to_string(v) +
                                   " is outside the vocabulary");
    std::vector<LabeledSequence> out;
    out.reserve(data.size());
    for (const auto& seq : data) {
        LabeledSequence ls;
        ls.seq = seq;
        ls.labels.resize(plan.n_labels);
        for (int j = 0; j < plan.n_labels; ++j)
            ls.labels[j] = rule_eval(plan.rules[j], seq, vocab) ? 1 : 0;
        out.push_back(std::move(ls));
    }
    return out;
}

}  // namespace s2c
