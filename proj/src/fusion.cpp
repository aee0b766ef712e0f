#include "seq2cause/fusion.hpp"

#include "util.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace s2c {

namespace {

// Linear-interpolation quantile over a sorted copy.
double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double h = double(v.size() - 1) * q;
    size_t lo = size_t(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

}  // namespace

EdgeStats edge_frequency(const std::vector<MarkovBoundaryGraph>& graphs,
                         const std::vector<std::vector<uint8_t>>* labels) {
    EdgeStats st;
    if (graphs.empty()) return st;
    const int K = graphs[0].n_labels;
    for (const auto& g : graphs)
        if (g.n_labels != K) throw config_error("graphs disagree on the label count");
    if (labels) {
        if (labels->size() != graphs.size())
            throw config_error("labels and graphs have different lengths");
        for (const auto& bits : *labels)
            if (int(bits.size()) != K)
                throw config_error("label vector size does not match the graphs");
    }

    struct Acc {
        int count = 0;
        double cmi = 0.0, ace_mean = 0.0, ace_std = 0.0;
    };
    std::map<std::pair<int, TokenId>, Acc> acc;
    std::map<int, int> support;
    for (int j = 0; j < K; ++j) support[j] = 0;
    for (size_t i = 0; i < graphs.size(); ++i) {
        for (const auto& [j, edges] : graphs[i].parents) {
            if (j < 0 || j >= K) throw config_error("graph edge label out of range");
            if (!labels && !edges.empty()) support[j] += 1;
            for (const auto& e : edges) {
                Acc& a = acc[{j, e.event}];
                a.count += 1;
                a.cmi += e.cmi;
                a.ace_mean += e.ace_mean;
                a.ace_std += e.ace_std;
            }
        }
        if (labels)
            for (int j = 0; j < K; ++j) support[j] += (*labels)[i][j] ? 1 : 0;
    }
    st.label_support = std::move(support);
    st.rows.reserve(acc.size());
    for (const auto& [key, a] : acc) {
        EdgeStat row;
        row.label = key.first;
        row.event = key.second;
        row.count = a.count;
        row.m_j = st.label_support.at(key.first);
        row.freq = row.m_j > 0 ? double(a.count) / row.m_j : 0.0;
        row.mean_cmi = a.cmi / a.count;
        row.mean_ace_mean = a.ace_mean / a.count;
        row.mean_ace_std = a.ace_std / a.count;
        st.rows.push_back(row);
    }
    return st;
}

std::function<double(double)> adaptive_threshold_fn(std::vector<int> supports, double tau_max,
                                                    double tau_min,
                                                    std::optional<double> k_override) {
    if (supports.empty()) throw config_error("adaptive threshold needs at least one support");
    if (tau_min < 0.0 || tau_min > tau_max)
        throw config_error("adaptive threshold needs 0 <= tau_min <= tau_max");
    std::vector<double> s;
    s.reserve(supports.size());
    for (int m : supports) {
        if (m < 1) throw config_error("supports must be >= 1");
        s.push_back(double(m));
    }
    double m0 = quantile(s, 0.5);
    double k;
    if (k_override) {
        k = *k_override;
        if (k <= 0.0) throw config_error("steepness override must be positive");
    } else {
        double q25 = quantile(s, 0.25);
        double q75 = quantile(s, 0.75);
        k = q75 > q25 ? 2.0 * std::log(3.0) / (std::log(q75) - std::log(q25)) : 1.0;
    }
    double ln_m0 = std::log(m0);
    return [=](double m) {
        if (m <= 0.0) return tau_max;
        return (tau_max - tau_min) / (1.0 + std::exp(k * (std::log(m) - ln_m0))) + tau_min;
    };
}

MarkovBoundaryGraph fuse(const std::vector<MarkovBoundaryGraph>& graphs, const FusionConfig& cfg,
                         const std::vector<std::vector<uint8_t>>* labels) {
    EdgeStats st = edge_frequency(graphs, labels);
    MarkovBoundaryGraph out;
    out.n_labels = graphs.empty() ? 0 : graphs[0].n_labels;
    if (st.rows.empty()) return out;

    std::function<double(const EdgeStat&)> tau_of;
    switch (cfg.strategy) {
        case FusionStrategy::Union:
            tau_of = [](const EdgeStat&) { return 0.0; };
            break;
        case FusionStrategy::StaticFrequency:
            tau_of = [&](const EdgeStat&) { return cfg.tau; };
            break;
        case FusionStrategy::Adaptive: {
            std::vector<int> supports;
            for (const auto& [j, m] : st.label_support)
                if (m > 0) supports.push_back(m);
            if (supports.empty()) return out;
            auto fn = adaptive_threshold_fn(supports, cfg.tau_max, cfg.tau_min, cfg.k_override);
            tau_of = [fn](const EdgeStat& r) { return fn(double(r.m_j)); };
            break;
        }
    }
    for (const auto& r : st.rows) {
        if (cfg.strategy != FusionStrategy::Union && r.freq < tau_of(r)) continue;
        out.parents[r.label].push_back({r.event, r.mean_cmi, r.mean_ace_mean, r.mean_ace_std,
                                        r.freq});
    }
    return out;
}

std::string fusion_report_csv(const std::vector<MarkovBoundaryGraph>& graphs,
                              const FusionConfig& cfg,
                              const std::vector<std::vector<uint8_t>>* labels) {
    EdgeStats st = edge_frequency(graphs, labels);
    std::function<double(const EdgeStat&)> tau_of;
    switch (cfg.strategy) {
        case FusionStrategy::Union:
            tau_of = [](const EdgeStat&) { return 0.0; };
            break;
        case FusionStrategy::StaticFrequency:
            tau_of = [&](const EdgeStat&) { return cfg.tau; };
            break;
        case FusionStrategy::Adaptive: {
            std::vector<int> supports;
            for (const auto& [j, m] : st.label_support)
                if (m > 0) supports.push_back(m);
            if (supports.empty()) {
                tau_of = [&](const EdgeStat&) { return cfg.tau_max; };
            } else {
                auto fn =
                    adaptive_threshold_fn(supports, cfg.tau_max, cfg.tau_min, cfg.k_override);
                tau_of = [fn](const EdgeStat& r) { return fn(double(r.m_j)); };
            }
            break;
        }
    }
    std::string csv = "label,event,count,m_j,frequency,tau_j,kept\n";
    for (const auto& r : st.rows) {
        double tau = tau_of(r);
        bool kept = cfg.strategy == FusionStrategy::Union || r.freq >= tau;
        csv += std::to_string(r.label) + "," + std::to_string(r.event) + "," +
               std::to_string(r.count) + "," + std::to_string(r.m_j) + "," +
               detail::fmt_num(r.freq) + "," + detail::fmt_num(tau) + "," + (kept ? "1" : "0") +
               "\n";
    }
    return csv;
}

}  // namespace s2c
