#include "seq2cause/eval.hpp"

#include "seq2cause/trace.hpp"
#include "util.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace s2c {

namespace {

LabelMetrics set_metrics(int label, const std::set<TokenId>& pred, const std::set<TokenId>& truth) {
    LabelMetrics m;
    m.label = label;
    for (TokenId t : pred) (truth.count(t) ? m.tp : m.fp) += 1;
    for (TokenId t : truth)
        if (!pred.count(t)) m.fn += 1;
    m.support = m.tp + m.fn;
    if (truth.empty() && pred.empty()) {
        m.precision = m.recall = m.f1 = 1.0;
        return m;
    }
    if (pred.empty()) m.empty_pred = true;
    PrfCounts c{m.tp, m.fp, m.fn};
    m.precision = c.precision();
    m.recall = c.recall();
    m.f1 = c.f1();
    return m;
}

void finish_report(MetricReport& r) {
    long tp = 0, fp = 0, fn = 0;
    double sp = 0, sr = 0, sf = 0, wp = 0, wr = 0, wf = 0, wsum = 0;
    for (const auto& m : r.per_label) {
        tp += m.tp;
        fp += m.fp;
        fn += m.fn;
        sp += m.precision;
        sr += m.recall;
        sf += m.f1;
        wp += m.precision * m.support;
        wr += m.recall * m.support;
        wf += m.f1 * m.support;
        wsum += m.support;
    }
    if (tp + fp + fn == 0) {
        r.micro_p = r.micro_r = r.micro_f1 = 1.0;
    } else {
        PrfCounts c{tp, fp, fn};
        r.micro_p = c.precision();
        r.micro_r = c.recall();
        r.micro_f1 = c.f1();
    }
    size_t n = r.per_label.size();
    if (n) {
        r.macro_p = sp / n;
        r.macro_r = sr / n;
        r.macro_f1 = sf / n;
    }
    if (wsum > 0) {
        r.weighted_p = wp / wsum;
        r.weighted_r = wr / wsum;
        r.weighted_f1 = wf / wsum;
    } else {
        r.weighted_p = r.macro_p;
        r.weighted_r = r.macro_r;
        r.weighted_f1 = r.macro_f1;
    }
}

}  // namespace

MetricReport mb_metrics(const MarkovBoundaryGraph& pred, const TruthBoundaries& truth) {
    std::set<int> all_labels;
    for (const auto& [j, v] : truth) all_labels.insert(j);
    for (const auto& [j, v] : pred.parents) all_labels.insert(j);
    MetricReport r;
    for (int j : all_labels) {
        std::set<TokenId> p, t;
        auto pit = pred.parents.find(j);
        if (pit != pred.parents.end())
            for (const auto& e : pit->second) p.insert(e.event);
        auto tit = truth.find(j);
        if (tit != truth.end()) t.insert(tit->second.begin(), tit->second.end());
        r.per_label.push_back(set_metrics(j, p, t));
    }
    finish_report(r);
    return r;
}

MetricReport pooled_mb_metrics(const std::vector<MarkovBoundaryGraph>& preds,
                               const std::vector<std::vector<uint8_t>>& labels,
                               const LabelPlan& plan) {
    if (preds.size() != labels.size())
        throw config_error("predictions and labels have different lengths");
    if (int(plan.rules.size()) != plan.n_labels)
        throw config_error("label plan needs one rule per label");
    MetricReport r;
    for (int j = 0; j < plan.n_labels; ++j) {
        auto vars = plan.rules[j].variables();
        std::set<TokenId> t(vars.begin(), vars.end());
        LabelMetrics m;
        m.label = j;
        bool any_pred = false;
        for (size_t i = 0; i < preds.size(); ++i) {
            if (int(labels[i].size()) != plan.n_labels)
                throw config_error("label vector size does not match the plan");
            if (!labels[i][j]) continue;
            std::set<TokenId> p;
            auto it = preds[i].parents.find(j);
            if (it != preds[i].parents.end())
                for (const auto& e : it->second) p.insert(e.event);
            if (!p.empty()) any_pred = true;
            for (TokenId v : p) (t.count(v) ? m.tp : m.fp) += 1;
            for (TokenId v : t)
                if (!p.count(v)) m.fn += 1;
        }
        m.support = m.tp + m.fn;
        if (m.tp + m.fp + m.fn == 0) {
            m.precision = m.recall = m.f1 = 1.0;
        } else {
            if (!any_pred) m.empty_pred = true;
            PrfCounts c{m.tp, m.fp, m.fn};
            m.precision = c.precision();
            m.recall = c.recall();
            m.f1 = c.f1();
        }
        r.per_label.push_back(m);
    }
    finish_report(r);
    return r;
}

PrfCounts edge_prf(const InstanceTimeGraph& pred, const InstanceTimeGraph& truth) {
    if (pred.n_nodes != truth.n_nodes)
        throw config_error("graphs have different node counts");
    std::set<std::pair<int, int>> p, t;
    for (const auto& e : pred.edges) p.insert({e.t_src, e.t_dst});
    for (const auto& e : truth.edges) t.insert({e.t_src, e.t_dst});
    PrfCounts c;
    for (const auto& e : p) (t.count(e) ? c.tp : c.fp) += 1;
    for (const auto& e : t)
        if (!p.count(e)) c.fn += 1;
    return c;
}

long shd(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
    if (a.n != b.n) throw config_error("adjacency matrices have different sizes");
    long d = 0;
    for (size_t i = 0; i < a.cells.size(); ++i) d += (a.cells[i] != 0) != (b.cells[i] != 0);
    return d;
}

long shd(const InstanceTimeGraph& a, const InstanceTimeGraph& b) {
    PrfCounts c = edge_prf(a, b);
    return c.fp + c.fn;
}

InstanceTimeGraph random_instance_baseline(int length, int context, double rho, uint64_t seed) {
    if (rho < 0.0 || rho > 1.0) throw config_error("rho must lie in [0, 1]");
    InstanceTimeGraph g;
    g.n_nodes = length + 1;
    Rng rng(stream_key(seed, fnv1a("rand-baseline")));
    for (const auto& p : enumerate_pairs(length, context))
        if (rng.unif01() < rho) g.edges.push_back({p.t_src, p.t_dst, 1.0});
    return g;
}

InstanceTimeGraph frequency_instance_baseline(const EventSequence& seq, int context, int top_k) {
    if (top_k < 1) throw config_error("top_k must be >= 1");
    const int L = seq.length();
    std::map<TokenId, int> counts;
    for (int i = 1; i <= L; ++i) counts[seq.tokens[i]] += 1;
    std::vector<std::pair<TokenId, int>> by_freq(counts.begin(), counts.end());
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::set<TokenId> causes;
    for (int i = 0; i < top_k && i < int(by_freq.size()); ++i) causes.insert(by_freq[i].first);
    InstanceTimeGraph g;
    g.n_nodes = L + 1;
    for (const auto& p : enumerate_pairs(L, context))
        if (p.t_src >= 1 && causes.count(seq.tokens[p.t_src]))
            g.edges.push_back({p.t_src, p.t_dst, 1.0});
    return g;
}

CpmwResult cpmw(std::span<const double> curve, double theta, bool quality_direction,
                std::optional<double> mu_seq) {
    if (curve.empty()) throw config_error("cpmw needs a nonempty curve");
    const int n = int(curve.size());
    double mu = mu_seq ? *mu_seq : double(n - 1);
    if (mu < 0.0 || mu > double(n - 1))
        throw config_error("mu_seq must lie within the curve's index range");
    CpmwResult r;
    int onset = -1;
    for (int i = 0; i < n; ++i) {
        bool crossed = quality_direction ? curve[i] >= theta : curve[i] <= theta;
        if (crossed) {
            onset = i;
            break;
        }
    }
    if (onset < 0) return r;
    r.has_onset = true;
    r.onset = double(onset);
    if (mu <= double(onset)) {
        r.auc = mu == double(onset) ? curve[onset] : 0.0;
        return r;
    }
    // trapezoidal integral of the piecewise-linear curve on [onset, mu]
    auto value_at = [&](double x) {
        int i = int(x);
        if (i >= n - 1) return curve[n - 1];
        return curve[i] + (x - i) * (curve[i + 1] - curve[i]);
    };
    double total = 0.0;
    double x = double(onset);
    while (x < mu) {
        double next = std::min(std::floor(x) + 1.0, mu);
        total += (value_at(x) + value_at(next)) / 2.0 * (next - x);
        x = next;
    }
    r.auc = total / (mu - double(onset));
    return r;
}

TruthTableResult truth_table_compare(const BooleanRule& pred, const BooleanRule& truth) {
    auto pv = pred.variables();
    auto tv = truth.variables();
    std::set<TokenId> uni(pv.begin(), pv.end());
    uni.insert(tv.begin(), tv.end());
    if (uni.size() > 20)
        throw config_error("truth table over " + std::to_string(uni.size()) +
                           " variables is too large");
    std::vector<TokenId> vars(uni.begin(), uni.end());
    TokenId max_var = vars.empty() ? 0 : vars.back();
    TruthTableResult r;
    r.n_rows = 1L << vars.size();
    long agree = 0, tp = 0, fp = 0, fn = 0;
    std::vector<uint8_t> present(size_t(max_var) + 1, 0);
    for (long row = 0; row < r.n_rows; ++row) {
        for (size_t i = 0; i < vars.size(); ++i) present[vars[i]] = (row >> i) & 1;
        bool p = pred.eval_presence(present);
        bool t = truth.eval_presence(present);
        agree += p == t;
        if (p && t) ++tp;
        if (p && !t) ++fp;
        if (!p && t) ++fn;
    }
    r.accuracy = double(agree) / r.n_rows;
    PrfCounts c{tp, fp, fn};
    r.precision = c.precision();
    r.recall = c.recall();
    r.f1 = c.f1();
    return r;
}

PrfCounts structural_rule_eval(const BooleanRule& pred, const BooleanRule& truth) {
    auto pv = pred.variables();
    auto tv = truth.variables();
    std::set<TokenId> p(pv.begin(), pv.end()), t(tv.begin(), tv.end());
    PrfCounts c;
    for (TokenId v : p) (t.count(v) ? c.tp : c.fp) += 1;
    for (TokenId v : t)
        if (!p.count(v)) c.fn += 1;
    return c;
}

std::string metrics_csv(const MetricReport& report) {
    std::string csv = "label,support,precision,recall,f1\n";
    long total = 0;
    for (const auto& m : report.per_label) {
        total += m.support;
        csv += std::to_string(m.label) + "," + std::to_string(m.support) + "," +
               detail::fmt_num(m.precision) + "," + detail::fmt_num(m.recall) + "," +
               detail::fmt_num(m.f1) + "\n";
    }
    csv += "micro," + std::to_string(total) + "," + detail::fmt_num(report.micro_p) + "," +
           detail::fmt_num(report.micro_r) + "," + detail::fmt_num(report.micro_f1) + "\n";
    csv += "macro," + std::to_string(total) + "," + detail::fmt_num(report.macro_p) + "," +
           detail::fmt_num(report.macro_r) + "," + detail::fmt_num(report.macro_f1) + "\n";
    csv += "weighted," + std::to_string(total) + "," + detail::fmt_num(report.weighted_p) + "," +
           detail::fmt_num(report.weighted_r) + "," + detail::fmt_num(report.weighted_f1) + "\n";
    return csv;
}

}  // namespace s2c
