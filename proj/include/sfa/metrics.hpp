#pragma once

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sfa/corpus.hpp"
#include "sfa/graph.hpp"

namespace sfa {

// Counts plus derived rates. Zero denominators yield 0, never NaN.
struct Prf {
    int gold = 0;
    int pred = 0;
    int matched = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline Prf make_prf(int matched, int gold, int pred) {
    Prf r;
    r.gold = gold;
    r.pred = pred;
    r.matched = matched;
    r.precision = pred > 0 ? static_cast<double>(matched) / pred : 0.0;
    r.recall = gold > 0 ? static_cast<double>(matched) / gold : 0.0;
    const double sum = r.precision + r.recall;
    r.f1 = sum > 0 ? 2.0 * r.precision * r.recall / sum : 0.0;
    return r;
}

enum class Role { Holder, Target, Expression };

inline const char* to_string(Role role) {
    switch (role) {
        case Role::Holder: return "holder";
        case Role::Target: return "target";
        case Role::Expression: return "expression";
    }
    fail("unknown role");
}

inline const Span& role_span(const SentimentTuple& t, Role role) {
    switch (role) {
        case Role::Holder: return t.holder;
        case Role::Target: return t.target;
        case Role::Expression: return t.expression;
    }
    fail("unknown role");
}

// Tuple lists aligned to gold sentences, one inner list per sentence.
using TupleLists = std::vector<std::vector<SentimentTuple>>;

inline void check_aligned(const std::vector<CorpusEntry>& gold, const TupleLists& pred) {
    if (gold.size() != pred.size())
        fail("evaluation: corpora differ in length, ", gold.size(), " gold vs ", pred.size(),
             " predicted sentences");
}

template <typename Key, typename Collect>
Prf set_prf(std::size_t sentences, Collect&& collect) {
    std::set<Key> gold, pred;
    for (std::size_t i = 0; i < sentences; ++i) collect(static_cast<int>(i), gold, pred);
    int matched = 0;
    for (const Key& k : pred) matched += gold.count(k) ? 1 : 0;
    return make_prf(matched, static_cast<int>(gold.size()), static_cast<int>(pred.size()));
}

// Exact-match span F1 for one role; empty spans carry no span and are excluded.
inline Prf span_f1(const std::vector<CorpusEntry>& gold, const TupleLists& pred, Role role) {
    check_aligned(gold, pred);
    using Key = std::tuple<int, int, int>;
    return set_prf<Key>(gold.size(), [&](int i, std::set<Key>& g, std::set<Key>& p) {
        for (const SentimentTuple& t : gold[static_cast<std::size_t>(i)].tuples) {
            const Span& s = role_span(t, role);
            if (!s.empty()) g.insert({i, s.begin, s.end});
        }
        for (const SentimentTuple& t : pred[static_cast<std::size_t>(i)]) {
            const Span& s = role_span(t, role);
            if (!s.empty()) p.insert({i, s.begin, s.end});
        }
    });
}

// Exact match on (sentence, target span, polarity); empty targets excluded.
inline Prf targeted_f1(const std::vector<CorpusEntry>& gold, const TupleLists& pred) {
    check_aligned(gold, pred);
    using Key = std::tuple<int, int, int, int>;
    return set_prf<Key>(gold.size(), [&](int i, std::set<Key>& g, std::set<Key>& p) {
        for (const SentimentTuple& t : gold[static_cast<std::size_t>(i)].tuples)
            if (!t.target.empty())
                g.insert({i, t.target.begin, t.target.end, static_cast<int>(t.polarity)});
        for (const SentimentTuple& t : pred[static_cast<std::size_t>(i)])
            if (!t.target.empty())
                p.insert({i, t.target.begin, t.target.end, static_cast<int>(t.polarity)});
    });
}

// Exact match on the full tuple: all three spans plus polarity.
inline Prf sentiment_graph_f1(const std::vector<CorpusEntry>& gold, const TupleLists& pred) {
    check_aligned(gold, pred);
    using Key = std::tuple<int, int, int, int, int, int, int, int>;
    return set_prf<Key>(gold.size(), [&](int i, std::set<Key>& g, std::set<Key>& p) {
        for (const SentimentTuple& t : gold[static_cast<std::size_t>(i)].tuples)
            g.insert({i, t.holder.begin, t.holder.end, t.target.begin, t.target.end,
                      t.expression.begin, t.expression.end, static_cast<int>(t.polarity)});
        for (const SentimentTuple& t : pred[static_cast<std::size_t>(i)])
            p.insert({i, t.holder.begin, t.holder.end, t.target.begin, t.target.end,
                      t.expression.begin, t.expression.end, static_cast<int>(t.polarity)});
    });
}

// Set F1 over (sentence, head, dep, label) quadruples.
inline Prf labeled_edge_f1(const std::vector<DepGraph>& gold, const std::vector<DepGraph>& pred) {
    if (gold.size() != pred.size())
        fail("evaluation: graph lists differ in length, ", gold.size(), " vs ", pred.size());
    for (std::size_t i = 0; i < gold.size(); ++i)
        if (gold[i].n != pred[i].n)
            fail("evaluation: graph ", i, " node counts differ, ", gold[i].n, " vs ", pred[i].n);
    using Key = std::tuple<int, int, int, std::string>;
    return set_prf<Key>(gold.size(), [&](int i, std::set<Key>& g, std::set<Key>& p) {
        for (const auto& [key, label] : gold[static_cast<std::size_t>(i)].edges)
            g.insert({i, key.first, key.second, label});
        for (const auto& [key, label] : pred[static_cast<std::size_t>(i)].edges)
            p.insert({i, key.first, key.second, label});
    });
}

struct MetricsReport {
    Prf holder;
    Prf target;
    Prf expression;
    double avg_span_f1 = 0.0;
    Prf targeted;
    Prf labeled_edge;
    Prf sentiment_graph;
};

// Full report with the parsing metric taken from explicit graphs (the
// decoder's output, when predictions come from a model).
inline MetricsReport evaluate_graphs(const std::vector<CorpusEntry>& gold, const TupleLists& pred,
                                     const std::vector<DepGraph>& gold_graphs,
                                     const std::vector<DepGraph>& pred_graphs) {
    check_aligned(gold, pred);
    MetricsReport report;
    report.holder = span_f1(gold, pred, Role::Holder);
    report.target = span_f1(gold, pred, Role::Target);
    report.expression = span_f1(gold, pred, Role::Expression);
    report.avg_span_f1 = (report.holder.f1 + report.target.f1 + report.expression.f1) / 3.0;
    report.targeted = targeted_f1(gold, pred);
    report.sentiment_graph = sentiment_graph_f1(gold, pred);
    report.labeled_edge = labeled_edge_f1(gold_graphs, pred_graphs);
    return report;
}

// Full report from aligned tuple predictions; graphs are re-encoded from the
// tuples on both sides so the parsing metric sees the same codec.
inline MetricsReport evaluate_tuples(const std::vector<CorpusEntry>& gold, const TupleLists& pred,
                                     bool head_final = true) {
    check_aligned(gold, pred);
    std::vector<DepGraph> gold_graphs, pred_graphs;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        gold_graphs.push_back(tuples_to_graph(gold[i].sentence, gold[i].tuples, head_final));
        pred_graphs.push_back(tuples_to_graph(gold[i].sentence, pred[i], head_final));
    }
    return evaluate_graphs(gold, pred, gold_graphs, pred_graphs);
}

inline nlohmann::json prf_json(const Prf& p) {
    return {{"precision", p.precision}, {"recall", p.recall},     {"f1", p.f1},
            {"gold", p.gold},           {"pred", p.pred},         {"matched", p.matched}};
}

inline nlohmann::json metrics_json(const MetricsReport& r) {
    return {{"spans",
             {{"holder", prf_json(r.holder)},
              {"target", prf_json(r.target)},
              {"expression", prf_json(r.expression)},
              {"avg_f1", r.avg_span_f1}}},
            {"targeted", prf_json(r.targeted)},
            {"labeled_edge", prf_json(r.labeled_edge)},
            {"sentiment_graph", prf_json(r.sentiment_graph)}};
}

// key=value lines for grepping plus one JSON blob line with everything.
inline std::string format_metrics_report(const MetricsReport& r) {
    std::string out;
    auto line = [&](const std::string& key, const Prf& p) {
        out += key + "_precision=" + detail::str(p.precision) + "\n";
        out += key + "_recall=" + detail::str(p.recall) + "\n";
        out += key + "_f1=" + detail::str(p.f1) + "\n";
    };
    line("holder", r.holder);
    line("target", r.target);
    line("expression", r.expression);
    out += "avg_span_f1=" + detail::str(r.avg_span_f1) + "\n";
    line("targeted", r.targeted);
    line("labeled_edge", r.labeled_edge);
    line("sentiment_graph", r.sentiment_graph);
    out += metrics_json(r).dump() + "\n";
    return out;
}

} // namespace sfa
