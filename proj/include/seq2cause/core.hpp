#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2c {

using TokenId = int32_t;
using Dist = std::vector<double>;  // categorical distribution over event ids

// Thrown for malformed configs, rules, files, and CLI input. Maps to exit
// code 2; every other exception maps to exit code 1.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Vocabulary {
    int32_t size = 0;              // event ids are [0, size)
    TokenId cls_id = 0;            // reserved start-of-sequence token
    std::optional<TokenId> unk_id;

    static Vocabulary make(int32_t size);  // cls_id = size, no unk
    bool valid_event(TokenId t) const { return t >= 0 && t < size; }
    bool valid_token(TokenId t) const {
        return valid_event(t) || t == cls_id || (unk_id && t == *unk_id);
    }
};

// tokens[0] is always the cls token; tokens[1..L] are events. L >= 1.
struct EventSequence {
    std::vector<TokenId> tokens;
    std::optional<std::vector<double>> timestamps;  // nondecreasing, starts at 0

    int length() const { return static_cast<int>(tokens.size()) - 1; }
    std::span<const TokenId> events() const {
        return {tokens.data() + 1, tokens.size() - 1};
    }
};

void validate_sequence(const EventSequence& seq, const Vocabulary& vocab);

struct LabeledSequence {
    EventSequence seq;
    std::vector<uint8_t> labels;  // multi-hot, one bit per label id
};

// Boolean rule over event presence: atoms are event ids written "x<k>",
// combined with ! & | and parentheses. & binds tighter than |.
class BooleanRule {
public:
    enum class Kind { Atom, Not, And, Or };

    static BooleanRule atom(TokenId id);
    static BooleanRule negate(BooleanRule r);
    static BooleanRule conj(BooleanRule a, BooleanRule b);
    static BooleanRule disj(BooleanRule a, BooleanRule b);
    static BooleanRule parse(const std::string& text);  // config_error on bad syntax

    Kind kind() const { return kind_; }
    TokenId event() const { return event_; }
    const std::vector<BooleanRule>& children() const { return kids_; }

    std::vector<TokenId> variables() const;  // sorted, deduplicated
    std::string str() const;

    // Evaluates presence over a token multiset (bitmask by event id).
    bool eval_presence(const std::vector<uint8_t>& present) const;

private:
    Kind kind_ = Kind::Atom;
    TokenId event_ = 0;
    std::vector<BooleanRule> kids_;
};

// Presence semantics over tokens[1..L]. Atom ids outside the vocabulary's
// event range raise config_error.
bool rule_eval(const BooleanRule& rule, const EventSequence& seq, const Vocabulary& vocab);

struct LabelPlan {
    int n_labels = 0;
    std::vector<BooleanRule> rules;  // rules[j] defines label j
};

// ---- Graphs ----

struct MbEdge {
    TokenId event = 0;
    double cmi = 0.0;
    double ace_mean = 0.0;
    double ace_std = 0.0;
    double freq = 0.0;  // populated by fusion, 0 at the sample level

    bool operator==(const MbEdge&) const = default;
};

struct MarkovBoundaryGraph {
    int n_labels = 0;
    std::map<int, std::vector<MbEdge>> parents;  // label id -> edges sorted by event id
    std::vector<int> suppressed;                 // labels dropped as degenerate

    bool operator==(const MarkovBoundaryGraph&) const = default;
};

struct TimeEdge {
    int t_src = 0;
    int t_dst = 0;
    double cmi = 0.0;

    bool operator==(const TimeEdge&) const = default;
};

// Nodes are sequence positions 0..n_nodes-1; edges satisfy t_src < t_dst and
// are kept sorted by (t_src, t_dst).
struct InstanceTimeGraph {
    int n_nodes = 0;
    std::vector<TimeEdge> edges;

    bool operator==(const InstanceTimeGraph&) const = default;
};

struct SummaryEdge {
    TokenId src = 0;
    TokenId dst = 0;
    double cmi = 0.0;

    bool operator==(const SummaryEdge&) const = default;
};

struct SummaryGraph {
    std::vector<TokenId> nodes;       // sorted event types
    std::vector<SummaryEdge> edges;   // sorted by (src, dst)

    bool operator==(const SummaryGraph&) const = default;
};

enum class SummaryAggregate { Max, Mean };

// Projects a position-level graph onto event types via the sequence's tokens.
// Parallel position edges collapse under the chosen aggregate (max default).
// Idempotent under repeated application to the same inputs.
SummaryGraph project_summary(const InstanceTimeGraph& g, const EventSequence& seq,
                             SummaryAggregate agg = SummaryAggregate::Max);

struct AdjacencyMatrix {
    int n = 0;
    std::vector<uint8_t> cells;  // row-major, values 0/1

    static AdjacencyMatrix zeros(int n) { return {n, std::vector<uint8_t>(size_t(n) * n, 0)}; }
    uint8_t& at(int i, int j) { return cells[size_t(i) * n + j]; }
    uint8_t at(int i, int j) const { return cells[size_t(i) * n + j]; }

    bool operator==(const AdjacencyMatrix&) const = default;
};

AdjacencyMatrix to_adjacency(const InstanceTimeGraph& g);
AdjacencyMatrix to_adjacency(const SummaryGraph& g, int vocab_size);

// ---- Serialization ----
// JSON with sorted keys, stable float formatting; DOT rounds cmi to 4
// decimals. JSON round-trips losslessly.

std::string to_json(const MarkovBoundaryGraph& g);
std::string to_json(const InstanceTimeGraph& g);
std::string to_json(const SummaryGraph& g);

MarkovBoundaryGraph mb_graph_from_json(const std::string& text);
InstanceTimeGraph instance_graph_from_json(const std::string& text);
SummaryGraph summary_graph_from_json(const std::string& text);

std::string to_dot(const MarkovBoundaryGraph& g);
std::string to_dot(const InstanceTimeGraph& g);
std::string to_dot(const SummaryGraph& g);

// ---- Dataset I/O (JSON lines, one sequence per line) ----

std::string dataset_to_jsonl(const std::vector<LabeledSequence>& data);
std::vector<LabeledSequence> dataset_from_jsonl(const std::string& text, const Vocabulary& vocab);

}  // namespace s2c
