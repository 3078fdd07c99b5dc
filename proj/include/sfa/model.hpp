#pragma once

#include <string>
#include <vector>

#include "sfa/decoder.hpp"
#include "sfa/encoder.hpp"
#include "sfa/scorer_first.hpp"
#include "sfa/scorer_second.hpp"

namespace sfa {

struct Model {
    Config config;
    Vocab vocab;
    LabelSet labels;
    Encoder encoder;
    FirstOrderScorer first;
    SecondOrderScorer second;

    static Model init(const Config& config, const Vocab& vocab, const LabelSet& labels,
                      std::mt19937& rng) {
        Model m;
        m.config = config;
        m.vocab = vocab;
        m.labels = labels;
        m.encoder = Encoder::init(config, vocab, rng);
        m.first = FirstOrderScorer::init(config, labels.size(), rng);
        m.second = SecondOrderScorer::init(config, rng);
        return m;
    }

    /// Edge logits (refined by MFVI when second order is on) and label logits.
    ScoreSet forward(Tape& tape, const Sentence& s, Mode mode, std::mt19937& rng) const {
        Tensor e = encoder.embed(tape, s, vocab, mode, rng);
        Tensor h = encoder.contextualize(tape, e, mode, rng);
        Tensor hh = encoder.project_head(tape, h);
        Tensor hd = encoder.project_dep(tape, h);
        ScoreSet scores = first.score(tape, hh, hd, config);
        if (config.use_second_order) {
            Tensor hm = encoder.project_mid(tape, h);
            scores.edge = second.refine(tape, scores.edge, hh, hm, hd, config);
        }
        return scores;
    }

    /// Edge loss: mean binary cross-entropy over every cell. Label loss: mean
    /// categorical cross-entropy over gold-edge cells only. Summed 1:1; a
    /// sentence with no gold edges contributes the edge term alone.
    Tensor compute_loss(Tape& tape, const ScoreSet& scores, const DepGraph& gold) const {
        const int n = scores.edge.dim(0);
        if (gold.n != n)
            fail("compute_loss: scores cover ", n, " nodes but the gold graph has ", gold.n);
        Tensor targets = Tensor::zeros({n, n}, false);
        std::vector<std::pair<int, int>> cells;
        std::vector<int> classes;
        for (const auto& [key, label] : gold.edges) {
            targets.at(key.first, key.second) = 1.0;
            cells.push_back(key);
            classes.push_back(labels.index(label));
        }
        Tensor edge_loss = cross_entropy(tape, scores.edge, targets);
        if (cells.empty()) return edge_loss;
        Tensor gold_rows = gather_cells(tape, scores.label, cells);
        Tensor label_loss = cross_entropy(tape, gold_rows, classes);
        return add(tape, edge_loss, label_loss);
    }

    DepGraph predict_graph(const Sentence& s) const {
        Tape tape;
        std::mt19937 rng(0); // eval mode never draws
        ScoreSet scores = forward(tape, s, Mode::Eval, rng);
        return decode_graph(scores.edge, scores.label, labels, config.edge_threshold);
    }

    std::vector<SentimentTuple> predict_tuples(const Sentence& s,
                                               DecodeReport* report = nullptr) const {
        return decode_tuples(predict_graph(s), report);
    }

    /// Every trainable tensor; the optimizer steps all of them regardless of
    /// which scorer path the config enables (unused ones see zero gradients).
    std::vector<Tensor> parameters() const {
        std::vector<Tensor> params = encoder.parameters();
        for (const Tensor& t : first.parameters()) params.push_back(t);
        for (const Tensor& t : second.parameters()) params.push_back(t);
        return params;
    }
};

/// Stable name -> tensor walk over everything parameters() returns, in the
/// same order. Checkpoints key tensors by these names.
template <typename F>
void visit_params(const Model& m, F&& f) {
    auto lstm = [&](const std::string& prefix, const LstmParams& p) {
        if (!p.Wx.defined()) return;
        f(prefix + ".Wx", p.Wx);
        f(prefix + ".Wh", p.Wh);
        f(prefix + ".b", p.b);
    };
    auto maybe = [&](const std::string& name, const Tensor& t) {
        if (t.defined()) f(name, t);
    };
    maybe("encoder.word_table", m.encoder.word_table);
    maybe("encoder.pos_table", m.encoder.pos_table);
    maybe("encoder.lemma_table", m.encoder.lemma_table);
    maybe("encoder.char_table", m.encoder.char_table);
    lstm("encoder.char_fwd", m.encoder.char_fwd);
    lstm("encoder.char_bwd", m.encoder.char_bwd);
    f("encoder.root", m.encoder.root);
    for (std::size_t i = 0; i < m.encoder.fwd_layers.size(); ++i) {
        lstm("encoder.fwd." + std::to_string(i), m.encoder.fwd_layers[i]);
        lstm("encoder.bwd." + std::to_string(i), m.encoder.bwd_layers[i]);
    }
    f("encoder.head_w", m.encoder.head_w);
    f("encoder.head_b", m.encoder.head_b);
    f("encoder.dep_w", m.encoder.dep_w);
    f("encoder.dep_b", m.encoder.dep_b);
    f("encoder.mid_w", m.encoder.mid_w);
    f("encoder.mid_b", m.encoder.mid_b);

    f("first.biaffine.We", m.first.biaffine.We);
    for (std::size_t i = 0; i < m.first.biaffine.Wl.size(); ++i)
        f("first.biaffine.Wl." + std::to_string(i), m.first.biaffine.Wl[i]);
    auto sfa = [&](const std::string& prefix, const SfaParams& p) {
        for (std::size_t i = 0; i < p.classes.size(); ++i) {
            const std::string base = prefix + "." + std::to_string(i);
            const SfaClassParams& cp = p.classes[i];
            f(base + ".P", cp.P);
            f(base + ".pb", cp.pb);
            f(base + ".Wah", cp.Wah);
            f(base + ".bah", cp.bah);
            f(base + ".Wad", cp.Wad);
            f(base + ".bad", cp.bad);
        }
    };
    sfa("first.sfa_edge", m.first.sfa_edge);
    sfa("first.sfa_label", m.first.sfa_label);

    auto relation = [&](const std::string& prefix, const RelationParams& p) {
        f(prefix + ".Uh", p.Uh);
        f(prefix + ".Um", p.Um);
        f(prefix + ".Ud", p.Ud);
        f(prefix + ".P", p.P);
        f(prefix + ".pb", p.pb);
        f(prefix + ".Wh", p.Wh);
        f(prefix + ".bh", p.bh);
        f(prefix + ".Wm", p.Wm);
        f(prefix + ".bm", p.bm);
        f(prefix + ".Wd", p.Wd);
        f(prefix + ".bd", p.bd);
    };
    relation("second.sib", m.second.sib);
    relation("second.cop", m.second.cop);
    relation("second.grp", m.second.grp);
}

} // namespace sfa
