#include "seq2cause/core.hpp"

#include "util.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "json.hpp"

namespace s2c {

using nlohmann::json;

Vocabulary Vocabulary::make(int32_t size) {
    if (size <= 0) throw config_error("vocabulary size must be positive");
    Vocabulary v;
    v.size = size;
    v.cls_id = size;
    return v;
}

void validate_sequence(const EventSequence& seq, const Vocabulary& vocab) {
    if (seq.tokens.size() < 2) throw config_error("sequence needs a cls token and >= 1 event");
    if (seq.tokens[0] != vocab.cls_id) throw config_error("sequence must start with the cls token");
    for (size_t i = 1; i < seq.tokens.size(); ++i) {
        TokenId t = seq.tokens[i];
        if (!vocab.valid_event(t))
            throw config_error("token " + std::to_string(t) + " at position " + std::to_string(i) +
                               " is not an event id");
    }
    if (seq.timestamps) {
        const auto& ts = *seq.timestamps;
        if (ts.size() != seq.tokens.size())
            throw config_error("timestamps must align with tokens");
        if (ts[0] != 0.0) throw config_error("timestamps must start at 0");
        for (size_t i = 1; i < ts.size(); ++i)
            if (ts[i] < ts[i - 1]) throw config_error("timestamps must be nondecreasing");
    }
}

// ---- BooleanRule ----

BooleanRule BooleanRule::atom(TokenId id) {
    BooleanRule r;
    r.kind_ = Kind::Atom;
    r.event_ = id;
    return r;
}

BooleanRule BooleanRule::negate(BooleanRule r) {
    BooleanRule out;
    out.kind_ = Kind::Not;
    out.kids_.push_back(std::move(r));
    return out;
}

BooleanRule BooleanRule::conj(BooleanRule a, BooleanRule b) {
    BooleanRule out;
    out.kind_ = Kind::And;
    out.kids_.push_back(std::move(a));
    out.kids_.push_back(std::move(b));
    return out;
}

BooleanRule BooleanRule::disj(BooleanRule a, BooleanRule b) {
    BooleanRule out;
    out.kind_ = Kind::Or;
    out.kids_.push_back(std::move(a));
    out.kids_.push_back(std::move(b));
    return out;
}

namespace {

struct RuleParser {
    const std::string& text;
    size_t pos = 0;

    explicit RuleParser(const std::string& t) : text(t) {}

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& why) {
        throw config_error("rule parse error at offset " + std::to_string(pos) + ": " + why +
                           " in \"" + text + "\"");
    }

    BooleanRule expr() {
        BooleanRule left = term();
        while (eat('|')) left = BooleanRule::disj(std::move(left), term());
        return left;
    }

    BooleanRule term() {
        BooleanRule left = factor();
        while (eat('&')) left = BooleanRule::conj(std::move(left), factor());
        return left;
    }

    BooleanRule factor() {
        skip_ws();
        if (eat('!')) return BooleanRule::negate(factor());
        if (eat('(')) {
            BooleanRule inner = expr();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        return atom();
    }

    BooleanRule atom() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() &&
               (std::isalpha(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        size_t digits = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos == digits) fail("expected an event atom like x3");
        if (start == digits && digits == pos) fail("expected an event atom");
        return BooleanRule::atom(static_cast<TokenId>(std::stol(text.substr(digits, pos - digits))));
    }
};

}  // namespace

BooleanRule BooleanRule::parse(const std::string& text) {
    RuleParser p(text);
    p.skip_ws();
    if (p.pos >= text.size()) throw config_error("empty rule");
    BooleanRule r = p.expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    return r;
}

std::vector<TokenId> BooleanRule::variables() const {
    std::set<TokenId> vars;
    std::vector<const BooleanRule*> stack = {this};
    while (!stack.empty()) {
        const BooleanRule* r = stack.back();
        stack.pop_back();
        if (r->kind_ == Kind::Atom)
            vars.insert(r->event_);
        else
            for (const auto& k : r->kids_) stack.push_back(&k);
    }
    return {vars.begin(), vars.end()};
}

std::string BooleanRule::str() const {
    switch (kind_) {
        case Kind::Atom:
            return "x" + std::to_string(event_);
        case Kind::Not:
            return "!(" + kids_[0].str() + ")";
        case Kind::And:
            return "(" + kids_[0].str() + " & " + kids_[1].str() + ")";
        case Kind::Or:
            return "(" + kids_[0].str() + " | " + kids_[1].str() + ")";
    }
    return {};
}

bool BooleanRule::eval_presence(const std::vector<uint8_t>& present) const {
    switch (kind_) {
        case Kind::Atom:
            return event_ >= 0 && size_t(event_) < present.size() && present[event_];
        case Kind::Not:
            return !kids_[0].eval_presence(present);
        case Kind::And:
            return kids_[0].eval_presence(present) && kids_[1].eval_presence(present);
        case Kind::Or:
            return kids_[0].eval_presence(present) || kids_[1].eval_presence(present);
    }
    return false;
}

bool rule_eval(const BooleanRule& rule, const EventSequence& seq, const Vocabulary& vocab) {
    for (TokenId v : rule.variables())
        if (!vocab.valid_event(v))
            throw config_error("rule atom x" + std::to_string(v) + " is outside the vocabulary");
    std::vector<uint8_t> present(vocab.size, 0);
    for (TokenId t : seq.events()) {
        if (!vocab.valid_event(t))
            throw config_error("sequence token " + std::to_string(t) + " is not an event id");
        present[t] = 1;
    }
    return rule.eval_presence(present);
}

// ---- summary projection / adjacency ----

SummaryGraph project_summary(const InstanceTimeGraph& g, const EventSequence& seq,
                             SummaryAggregate agg) {
    if (g.n_nodes != int(seq.tokens.size()))
        throw config_error("instance graph and sequence disagree on node count");
    std::set<TokenId> nodes(seq.events().begin(), seq.events().end());
    std::map<std::pair<TokenId, TokenId>, std::pair<double, int>> acc;  // value, count
    for (const auto& e : g.edges) {
        TokenId u = seq.tokens[e.t_src];
        TokenId v = seq.tokens[e.t_dst];
        if (!nodes.count(u) || !nodes.count(v)) continue;  // cls endpoints have no type
        auto& slot = acc[{u, v}];
        if (agg == SummaryAggregate::Max) {
            slot.first = slot.second == 0 ? e.cmi : std::max(slot.first, e.cmi);
        } else {
            slot.first += e.cmi;
        }
        slot.second += 1;
    }
    SummaryGraph out;
    out.nodes.assign(nodes.begin(), nodes.end());
    for (const auto& [key, slot] : acc) {
        double v = agg == SummaryAggregate::Max ? slot.first : slot.first / slot.second;
        out.edges.push_back({key.first, key.second, v});
    }
    return out;
}

AdjacencyMatrix to_adjacency(const InstanceTimeGraph& g) {
    AdjacencyMatrix a = AdjacencyMatrix::zeros(g.n_nodes);
    for (const auto& e : g.edges) a.at(e.t_src, e.t_dst) = 1;
    return a;
}

AdjacencyMatrix to_adjacency(const SummaryGraph& g, int vocab_size) {
    AdjacencyMatrix a = AdjacencyMatrix::zeros(vocab_size);
    for (const auto& e : g.edges) {
        if (e.src >= vocab_size || e.dst >= vocab_size)
            throw config_error("summary node outside the vocabulary");
        a.at(e.src, e.dst) = 1;
    }
    return a;
}

// ---- serialization ----

namespace {

void check_instance(const InstanceTimeGraph& g) {
    for (const auto& e : g.edges) {
        if (e.t_src < 0 || e.t_src >= e.t_dst || e.t_dst >= g.n_nodes)
            throw config_error("instance edge (" + std::to_string(e.t_src) + "," +
                               std::to_string(e.t_dst) + ") violates 0 <= src < dst < n_nodes");
    }
}

std::string dump_sorted(const json& j) { return j.dump(); }

json mb_to_obj(const MarkovBoundaryGraph& g) {
    json nodes = json::array();
    std::set<TokenId> events;
    for (const auto& [label, edges] : g.parents)
        for (const auto& e : edges) events.insert(e.event);
    for (TokenId e : events) nodes.push_back({{"id", e}, {"role", "event"}});
    for (int j = 0; j < g.n_labels; ++j) nodes.push_back({{"id", j}, {"role", "label"}});
    json edges = json::array();
    for (const auto& [label, list] : g.parents) {
        if (label < 0 || label >= g.n_labels)
            throw config_error("edge label " + std::to_string(label) + " out of range");
        for (const auto& e : list)
            edges.push_back({{"src", e.event},
                             {"dst", label},
                             {"cmi", e.cmi},
                             {"ace_mean", e.ace_mean},
                             {"ace_std", e.ace_std},
                             {"freq", e.freq}});
    }
    return {{"kind", "mb"},
            {"n_labels", g.n_labels},
            {"suppressed", g.suppressed},
            {"nodes", nodes},
            {"edges", edges}};
}

}  // namespace

std::string to_json(const MarkovBoundaryGraph& g) { return dump_sorted(mb_to_obj(g)); }

std::string to_json(const InstanceTimeGraph& g) {
    check_instance(g);
    auto edges = g.edges;
    std::sort(edges.begin(), edges.end(), [](const TimeEdge& a, const TimeEdge& b) {
        return a.t_src != b.t_src ? a.t_src < b.t_src : a.t_dst < b.t_dst;
    });
    json je = json::array();
    for (const auto& e : edges) je.push_back({{"src", e.t_src}, {"dst", e.t_dst}, {"cmi", e.cmi}});
    return dump_sorted({{"kind", "instance"}, {"n_nodes", g.n_nodes}, {"edges", je}});
}

std::string to_json(const SummaryGraph& g) {
    json je = json::array();
    auto edges = g.edges;
    std::sort(edges.begin(), edges.end(), [](const SummaryEdge& a, const SummaryEdge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    for (const auto& e : edges) je.push_back({{"src", e.src}, {"dst", e.dst}, {"cmi", e.cmi}});
    return dump_sorted({{"kind", "summary"}, {"nodes", g.nodes}, {"edges", je}});
}

namespace {

json parse_kind(const std::string& text, const char* kind) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("bad graph json: ") + e.what());
    }
    if (!j.is_object() || j.value("kind", "") != kind)
        throw config_error(std::string("expected a graph of kind '") + kind + "'");
    return j;
}

}  // namespace

MarkovBoundaryGraph mb_graph_from_json(const std::string& text) {
    json j = parse_kind(text, "mb");
    MarkovBoundaryGraph g;
    try {
        g.n_labels = j.at("n_labels").get<int>();
        g.suppressed = j.value("suppressed", std::vector<int>{});
        for (const auto& e : j.at("edges")) {
            MbEdge edge{e.at("src").get<TokenId>(), e.at("cmi").get<double>(),
                        e.value("ace_mean", 0.0), e.value("ace_std", 0.0), e.value("freq", 0.0)};
            g.parents[e.at("dst").get<int>()].push_back(edge);
        }
    } catch (const json::exception& e) {
        throw config_error(std::string("bad mb graph: ") + e.what());
    }
    for (auto& [label, edges] : g.parents)
        std::sort(edges.begin(), edges.end(),
                  [](const MbEdge& a, const MbEdge& b) { return a.event < b.event; });
    return g;
}

InstanceTimeGraph instance_graph_from_json(const std::string& text) {
    json j = parse_kind(text, "instance");
    InstanceTimeGraph g;
    try {
        g.n_nodes = j.at("n_nodes").get<int>();
        for (const auto& e : j.at("edges"))
            g.edges.push_back(
                {e.at("src").get<int>(), e.at("dst").get<int>(), e.at("cmi").get<double>()});
    } catch (const json::exception& e) {
        throw config_error(std::string("bad instance graph: ") + e.what());
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const TimeEdge& a, const TimeEdge& b) {
        return a.t_src != b.t_src ? a.t_src < b.t_src : a.t_dst < b.t_dst;
    });
    check_instance(g);
    return g;
}

SummaryGraph summary_graph_from_json(const std::string& text) {
    json j = parse_kind(text, "summary");
    SummaryGraph g;
    try {
        g.nodes = j.at("nodes").get<std::vector<TokenId>>();
        for (const auto& e : j.at("edges"))
            g.edges.push_back(
                {e.at("src").get<TokenId>(), e.at("dst").get<TokenId>(), e.at("cmi").get<double>()});
    } catch (const json::exception& e) {
        throw config_error(std::string("bad summary graph: ") + e.what());
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const SummaryEdge& a, const SummaryEdge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    return g;
}

namespace {

std::string dot4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string to_dot(const MarkovBoundaryGraph& g) {
    std::ostringstream out;
    out << "digraph mb {\n";
    for (const auto& [label, edges] : g.parents)
        for (const auto& e : edges)
            out << "  \"x" << e.event << "\" -> \"y" << label << "\" [label=\"" << dot4(e.cmi)
                << "\"];\n";
    out << "}\n";
    return out.str();
}

std::string to_dot(const InstanceTimeGraph& g) {
    check_instance(g);
    std::ostringstream out;
    out << "digraph instance {\n";
    for (const auto& e : g.edges)
        out << "  \"t" << e.t_src << "\" -> \"t" << e.t_dst << "\" [label=\"" << dot4(e.cmi)
            << "\"];\n";
    out << "}\n";
    return out.str();
}

std::string to_dot(const SummaryGraph& g) {
    std::ostringstream out;
    out << "digraph summary {\n";
    for (TokenId n : g.nodes) out << "  \"x" << n << "\";\n";
    for (const auto& e : g.edges)
        out << "  \"x" << e.src << "\" -> \"x" << e.dst << "\" [label=\"" << dot4(e.cmi)
            << "\"];\n";
    out << "}\n";
    return out.str();
}

// ---- dataset jsonl ----

std::string dataset_to_jsonl(const std::vector<LabeledSequence>& data) {
    std::string out;
    for (const auto& ls : data) {
        json j;
        j["tokens"] = ls.seq.tokens;
        if (!ls.labels.empty()) j["labels"] = ls.labels;
        if (ls.seq.timestamps) j["timestamps"] = *ls.seq.timestamps;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<LabeledSequence> dataset_from_jsonl(const std::string& text, const Vocabulary& vocab) {
    std::vector<LabeledSequence> out;
    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw config_error("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        LabeledSequence ls;
        try {
            ls.seq.tokens = j.at("tokens").get<std::vector<TokenId>>();
            if (j.contains("labels")) ls.labels = j.at("labels").get<std::vector<uint8_t>>();
            if (j.contains("timestamps"))
                ls.seq.timestamps = j.at("timestamps").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw config_error("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            validate_sequence(ls.seq, vocab);
        } catch (const config_error& e) {
            throw config_error("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(ls));
    }
    return out;
}

}  // namespace s2c
