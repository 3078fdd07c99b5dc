#pragma once

#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "sfa/corpus.hpp"

namespace sfa {

/// Fixed label inventory for the sentiment graph.
struct LabelSet {
    std::vector<std::string> labels;

    int size() const { return static_cast<int>(labels.size()); }

    int index(const std::string& label) const {
        for (int i = 0; i < size(); ++i)
            if (labels[static_cast<std::size_t>(i)] == label) return i;
        fail("unknown label \"", label, "\"");
    }

    const std::string& name(int i) const {
        if (i < 0 || i >= size()) fail("label index ", i, " out of range [0, ", size(), ")");
        return labels[static_cast<std::size_t>(i)];
    }

    static LabelSet sentiment() {
        return LabelSet{{"exp:Positive", "exp:Negative", "exp:Neutral", "exp", "hold", "targ"}};
    }
};

inline std::string root_label(Polarity p) { return detail::str("exp:", to_string(p)); }

/// Dependency graph over a sentence with a virtual root at index 0.
/// Node i >= 1 is token i-1; at most one labeled edge per (head, dep) pair.
struct DepGraph {
    int n = 0; // node count, tokens + 1
    std::map<std::pair<int, int>, std::string> edges;

    void add_edge(int head, int dep, const std::string& label) {
        if (head < 0 || head >= n || dep < 0 || dep >= n)
            fail("edge (", head, " -> ", dep, ") out of range for ", n, " nodes");
        if (head == dep) fail("self-loop at node ", head);
        auto [it, inserted] = edges.try_emplace({head, dep}, label);
        if (!inserted && it->second != label)
            fail("conflicting labels on edge (", head, " -> ", dep, "): \"", it->second,
                 "\" vs \"", label, "\"");
    }

    bool has_edge(int head, int dep) const { return edges.count({head, dep}) > 0; }

    const std::string* label(int head, int dep) const {
        auto it = edges.find({head, dep});
        return it == edges.end() ? nullptr : &it->second;
    }
};

/// Structural checks beyond what DepGraph enforces by construction:
/// root never a dependent, root edges carry polarity labels, known labels only.
inline std::vector<std::string> validate_graph(const DepGraph& g,
                                               const LabelSet& labels = LabelSet::sentiment()) {
    std::vector<std::string> problems;
    for (const auto& [key, label] : g.edges) {
        const auto& [head, dep] = key;
        if (dep == 0) problems.push_back(detail::str("edge (", head, " -> 0) targets the root"));
        bool known = true;
        try {
            labels.index(label);
        } catch (const Error&) {
            known = false;
        }
        if (!known)
            problems.push_back(detail::str("edge (", head, " -> ", dep, ") has unknown label \"",
                                           label, "\""));
        bool is_root_label = label.rfind("exp:", 0) == 0;
        if (head == 0 && !is_root_label)
            problems.push_back(detail::str("root edge (0 -> ", dep, ") labeled \"", label,
                                           "\" instead of a polarity label"));
        if (head != 0 && is_root_label)
            problems.push_back(detail::str("non-root edge (", head, " -> ", dep,
                                           ") carries polarity label \"", label, "\""));
    }
    return problems;
}

namespace detail {

// The head token of a span: last token under head-final encoding, first otherwise.
inline int span_head(const Span& span, bool head_final) {
    return head_final ? span.end - 1 : span.begin;
}

} // namespace detail

/// Encode sentiment tuples as a dependency graph. For each tuple the
/// expression head receives a polarity-labeled root edge; remaining
/// expression tokens attach to it with "exp"; holder and target spans
/// attach their own heads with "hold"/"targ" and chain span-internal
/// tokens to that head with the same label. Identical edges from
/// different tuples merge; a label clash is a conversion error naming
/// the colliding tuples.
inline DepGraph tuples_to_graph(const Sentence& sentence,
                                const std::vector<SentimentTuple>& tuples,
                                bool head_final = true) {
    DepGraph g;
    g.n = sentence.size() + 1;
    std::map<std::pair<int, int>, int> source; // edge -> first tuple index
    auto add = [&](int head, int dep, const std::string& label, int tuple_index) {
        auto it = g.edges.find({head, dep});
        if (it != g.edges.end() && it->second != label)
            fail("sentence ", sentence.id, ": tuples ", source[{head, dep}], " and ",
                 tuple_index, " assign labels \"", it->second, "\" and \"", label,
                 "\" to edge (", head, " -> ", dep, ")");
        g.add_edge(head, dep, label);
        source.try_emplace({head, dep}, tuple_index);
    };
    auto check_span = [&](const Span& s, const char* role, int tuple_index) {
        if (s.empty()) return;
        if (s.begin < 0 || s.end > sentence.size())
            fail("sentence ", sentence.id, ": tuple ", tuple_index, " ", role, " span [",
                 s.begin, ", ", s.end, ") exceeds ", sentence.size(), " tokens");
    };
    for (int t = 0; t < static_cast<int>(tuples.size()); ++t) {
        const SentimentTuple& tuple = tuples[static_cast<std::size_t>(t)];
        if (tuple.expression.empty())
            fail("sentence ", sentence.id, ": tuple ", t, " has an empty expression");
        check_span(tuple.expression, "expression", t);
        check_span(tuple.holder, "holder", t);
        check_span(tuple.target, "target", t);
        const int exp_head = detail::span_head(tuple.expression, head_final) + 1;
        add(0, exp_head, root_label(tuple.polarity), t);
        for (int tok = tuple.expression.begin; tok < tuple.expression.end; ++tok)
            if (tok + 1 != exp_head) add(exp_head, tok + 1, "exp", t);
        auto attach_role = [&](const Span& span, const std::string& label) {
            if (span.empty()) return;
            const int role_head = detail::span_head(span, head_final) + 1;
            add(exp_head, role_head, label, t);
            for (int tok = span.begin; tok < span.end; ++tok)
                if (tok + 1 != role_head) add(role_head, tok + 1, label, t);
        };
        attach_role(tuple.holder, "hold");
        attach_role(tuple.target, "targ");
    }
    return g;
}

struct DecodeReport {
    int dropped_edges = 0; // edges no recovered tuple consumed
};

namespace detail {

// Nodes reachable from `start` through `label`-labeled edges, plus `start`.
inline std::set<int> label_closure(const DepGraph& g, int start, const std::string& label,
                                   std::set<std::pair<int, int>>& used) {
    std::set<int> nodes{start};
    std::vector<int> frontier{start};
    while (!frontier.empty()) {
        const int u = frontier.back();
        frontier.pop_back();
        for (const auto& [key, lab] : g.edges) {
            if (key.first != u || lab != label) continue;
            used.insert(key);
            if (nodes.insert(key.second).second) frontier.push_back(key.second);
        }
    }
    return nodes;
}

// Token-index hull of a set of graph node indices.
inline Span node_hull(const std::set<int>& nodes) {
    return Span{*nodes.begin() - 1, *nodes.rbegin()};
}

} // namespace detail

/// Recover sentiment tuples from any graph. Each polarity-labeled root
/// edge yields tuples: the expression span is the hull of the "exp"
/// closure from its dependent, and every holder head crossed with every
/// target head (absent roles stay empty) forms one tuple. Edges no
/// tuple consumes are dropped and counted. Total on arbitrary graphs.
inline std::vector<SentimentTuple> graph_to_tuples(const DepGraph& g,
                                                   DecodeReport* report = nullptr) {
    std::vector<SentimentTuple> tuples;
    std::set<std::pair<int, int>> used;
    for (const auto& [key, label] : g.edges) {
        if (key.first != 0) continue;
        Polarity polarity;
        try {
            if (label.rfind("exp:", 0) != 0) fail("not a polarity label");
            polarity = parse_polarity(label.substr(4));
        } catch (const Error&) {
            continue; // foreign root label: leave unused, counted below
        }
        used.insert(key);
        const int exp_head = key.second;
        const Span expression = detail::node_hull(detail::label_closure(g, exp_head, "exp", used));
        std::vector<Span> holders, targets;
        for (const auto& [child_key, child_label] : g.edges) {
            if (child_key.first != exp_head) continue;
            if (child_label == "hold") {
                used.insert(child_key);
                holders.push_back(
                    detail::node_hull(detail::label_closure(g, child_key.second, "hold", used)));
            } else if (child_label == "targ") {
                used.insert(child_key);
                targets.push_back(
                    detail::node_hull(detail::label_closure(g, child_key.second, "targ", used)));
            }
        }
        if (holders.empty()) holders.push_back(Span{});
        if (targets.empty()) targets.push_back(Span{});
        for (const Span& h : holders)
            for (const Span& t : targets)
                tuples.push_back(SentimentTuple{h, t, expression, polarity});
    }
    if (report) report->dropped_edges = static_cast<int>(g.edges.size() - used.size());
    std::sort(tuples.begin(), tuples.end());
    return tuples;
}

/// CoNLL-like dump: one token per line with id, form, and pipe-joined
/// head:label pairs ("_" when the token has no incoming edge).
inline void write_graph_tsv(std::ostream& out, const Sentence& sentence, const DepGraph& g) {
    out << "# sent_id = " << sentence.id << "\n";
    out << "# text = " << sentence.text << "\n";
    for (int tok = 0; tok < sentence.size(); ++tok) {
        const int node = tok + 1;
        std::string heads;
        for (const auto& [key, label] : g.edges) {
            if (key.second != node) continue;
            if (!heads.empty()) heads += "|";
            heads += detail::str(key.first, ":", label);
        }
        if (heads.empty()) heads = "_";
        out << node << "\t" << sentence.tokens[static_cast<std::size_t>(tok)] << "\t" << heads
            << "\n";
    }
    out << "\n";
}

} // namespace sfa
