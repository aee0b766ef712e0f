#pragma once

#include "seq2cause/core.hpp"
#include "seq2cause/rng.hpp"

#include <optional>
#include <set>

namespace s2c {

struct LabelMetrics {
    int label = 0;
    long support = 0;  // truth edge count
    long tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool empty_pred = false;  // truth nonempty but nothing predicted
};

struct MetricReport {
    std::vector<LabelMetrics> per_label;
    double micro_p = 0.0, micro_r = 0.0, micro_f1 = 0.0;
    double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
    double weighted_p = 0.0, weighted_r = 0.0, weighted_f1 = 0.0;  // by truth support
};

using TruthBoundaries = std::map<int, std::vector<TokenId>>;

// Set precision/recall/F1 of predicted parent sets against truth. Labels with
// empty truth and empty prediction score 1/1/1; empty prediction against
// nonempty truth scores 0 and sets the empty_pred flag.
MetricReport mb_metrics(const MarkovBoundaryGraph& pred, const TruthBoundaries& truth);

// Pools per-label TP/FP/FN across samples; sample i contributes label j only
// when its label bit is set. Truth is the rule's variable set.
MetricReport pooled_mb_metrics(const std::vector<MarkovBoundaryGraph>& preds,
                               const std::vector<std::vector<uint8_t>>& labels,
                               const LabelPlan& plan);

struct PrfCounts {
    long tp = 0, fp = 0, fn = 0;
    double precision() const { return tp + fp ? double(tp) / (tp + fp) : 0.0; }
    double recall() const { return tp + fn ? double(tp) / (tp + fn) : 0.0; }
    double f1() const {
        double p = precision(), r = recall();
        return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
};

PrfCounts edge_prf(const InstanceTimeGraph& pred, const InstanceTimeGraph& truth);

// Structural Hamming distance: L1 between binary adjacencies of equal size.
long shd(const AdjacencyMatrix& a, const AdjacencyMatrix& b);
long shd(const InstanceTimeGraph& a, const InstanceTimeGraph& b);

// Random-graph baseline: each candidate pair kept with probability rho.
InstanceTimeGraph random_instance_baseline(int length, int context, double rho, uint64_t seed);

// Frequency baseline: the top_k most frequent event types become universal
// causes; every candidate pair whose source token is one of them is an edge.
InstanceTimeGraph frequency_instance_baseline(const EventSequence& seq, int context, int top_k);

struct CpmwResult {
    bool has_onset = false;
    double onset = 0.0;  // first index where the curve crosses theta
    double auc = 0.0;    // trapezoidal mean of the curve on [onset, mu_seq]
};

// quality_direction=true crosses upward (curve >= theta), false downward.
// mu_seq defaults to the last index. No onset -> has_onset=false, auc=0.
CpmwResult cpmw(std::span<const double> curve, double theta, bool quality_direction = true,
                std::optional<double> mu_seq = {});

struct TruthTableResult {
    double accuracy = 0.0;
    double precision = 0.0;  // of predicting true rows
    double recall = 0.0;
    double f1 = 0.0;
    long n_rows = 0;
};

// Exhaustive comparison over all assignments of the union of both rules'
// variables. More than 20 distinct variables raises config_error.
TruthTableResult truth_table_compare(const BooleanRule& pred, const BooleanRule& truth);

// Variable-set precision/recall/F1 between two rules.
PrfCounts structural_rule_eval(const BooleanRule& pred, const BooleanRule& truth);

// CSV: label,support,precision,recall,f1 rows followed by micro/macro/
// weighted aggregate rows.
std::string metrics_csv(const MetricReport& report);

}  // namespace s2c
