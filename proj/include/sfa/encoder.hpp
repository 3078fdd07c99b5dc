#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "sfa/config.hpp"
#include "sfa/corpus.hpp"
#include "sfa/ops.hpp"

namespace sfa {

/// One LSTM direction. Gate order in the fused matrices: input,
/// forget, cell, output.
struct LstmParams {
    int input = 0;
    int hidden = 0;
    Tensor Wx; // [input x 4*hidden]
    Tensor Wh; // [hidden x 4*hidden]
    Tensor b;  // [4*hidden]
};

inline LstmParams make_lstm(int input, int hidden, std::mt19937& rng) {
    LstmParams p;
    p.input = input;
    p.hidden = hidden;
    p.Wx = Tensor::glorot({input, 4 * hidden}, rng);
    p.Wh = Tensor::glorot({hidden, 4 * hidden}, rng);
    p.b = Tensor::zeros({4 * hidden});
    return p;
}

/// Run one direction over x [n x input]; output row i is the hidden
/// state at position i (so the final state sits at row n-1 forward,
/// row 0 in reverse).
inline Tensor lstm_run(Tape& tape, const LstmParams& p, const Tensor& x, bool reverse = false) {
    if (x.rank() != 2 || x.dim(1) != p.input)
        fail("lstm_run: input shape ", shape_string(x.shape()), " does not match input width ",
             p.input);
    const int n = x.dim(0);
    const int h = p.hidden;
    Tensor h_state = Tensor::zeros({1, h}, false);
    Tensor c_state = Tensor::zeros({1, h}, false);
    std::vector<Tensor> out(static_cast<std::size_t>(n));
    for (int step = 0; step < n; ++step) {
        const int pos = reverse ? n - 1 - step : step;
        Tensor xt = rows(tape, x, pos, 1);
        Tensor gates = add(tape, affine(tape, xt, p.Wx, p.b), matmul(tape, h_state, p.Wh));
        Tensor gi = sigmoid(tape, cols(tape, gates, 0, h));
        Tensor gf = sigmoid(tape, cols(tape, gates, h, h));
        Tensor gg = tanh(tape, cols(tape, gates, 2 * h, h));
        Tensor go = sigmoid(tape, cols(tape, gates, 3 * h, h));
        c_state = add(tape, ewmul(tape, gf, c_state), ewmul(tape, gi, gg));
        h_state = ewmul(tape, go, tanh(tape, c_state));
        out[static_cast<std::size_t>(pos)] = h_state;
    }
    return concat_rows(tape, out);
}

inline Tensor bilstm_run(Tape& tape, const LstmParams& fwd, const LstmParams& bwd,
                         const Tensor& x) {
    return concat_cols(tape, {lstm_run(tape, fwd, x), lstm_run(tape, bwd, x, true)});
}

/// Load "word v1 ... vk" lines into a frozen table aligned with the
/// word vocabulary; words absent from the file keep zero rows.
inline Tensor load_external_vectors(const std::string& path, const Vocab& vocab, int dim) {
    std::ifstream in(path);
    if (!in) fail("cannot open external vector file ", path);
    Tensor table = Tensor::zeros({vocab.word_count(), dim}, false);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::istringstream fields(line);
        std::string word;
        fields >> word;
        const int id = vocab.word_id(word);
        std::vector<double> values;
        double v = 0.0;
        while (fields >> v) values.push_back(v);
        if (static_cast<int>(values.size()) != dim)
            fail(path, " line ", line_no, ": expected ", dim, " values, got ", values.size());
        if (id == Vocab::kUnk) continue; // word outside the vocabulary
        for (int k = 0; k < dim; ++k)
            table.at(id, k) = values[static_cast<std::size_t>(k)];
    }
    return table;
}

/// Token features -> contextualized representations -> role projections.
struct Encoder {
    Config config;
    Tensor word_table;  // [words x word_dim]
    Tensor pos_table;   // [tags x pos_dim]
    Tensor lemma_table; // [lemmas x lemma_dim]
    Tensor char_table;  // [chars x char_dim]
    LstmParams char_fwd, char_bwd;
    Tensor ext_table; // frozen, undefined when ext_dim == 0
    Tensor root;      // [1 x embed_dim]
    std::vector<LstmParams> fwd_layers, bwd_layers;
    Tensor head_w, head_b; // [lstm_out x proj] / [proj]
    Tensor dep_w, dep_b;
    Tensor mid_w, mid_b; // third role for the second-order scorer

    static Encoder init(const Config& config, const Vocab& vocab, std::mt19937& rng) {
        Encoder e;
        e.config = config;
        if (config.word_dim > 0)
            e.word_table = Tensor::glorot({vocab.word_count(), config.word_dim}, rng);
        if (config.pos_dim > 0)
            e.pos_table = Tensor::glorot({vocab.pos_count(), config.pos_dim}, rng);
        if (config.lemma_dim > 0)
            e.lemma_table = Tensor::glorot({vocab.lemma_count(), config.lemma_dim}, rng);
        if (config.char_dim > 0) {
            e.char_table = Tensor::glorot({vocab.char_count(), config.char_dim}, rng);
            e.char_fwd = make_lstm(config.char_dim, config.char_hidden, rng);
            e.char_bwd = make_lstm(config.char_dim, config.char_hidden, rng);
        }
        e.root = Tensor::uniform({1, config.embed_dim()}, 0.1, rng);
        int width = config.embed_dim();
        for (int layer = 0; layer < config.lstm_layers; ++layer) {
            e.fwd_layers.push_back(make_lstm(width, config.lstm_hidden, rng));
            e.bwd_layers.push_back(make_lstm(width, config.lstm_hidden, rng));
            width = config.lstm_out_dim();
        }
        e.head_w = Tensor::glorot({config.lstm_out_dim(), config.proj_dim}, rng);
        e.head_b = Tensor::zeros({config.proj_dim});
        e.dep_w = Tensor::glorot({config.lstm_out_dim(), config.proj_dim}, rng);
        e.dep_b = Tensor::zeros({config.proj_dim});
        e.mid_w = Tensor::glorot({config.lstm_out_dim(), config.proj_dim}, rng);
        e.mid_b = Tensor::zeros({config.proj_dim});
        return e;
    }

    /// Per-token feature rows with the learned root prepended:
    /// [word | pos | lemma | char BiLSTM final states | external].
    /// A feature whose annotation is missing contributes zeros.
    Tensor embed(Tape& tape, const Sentence& s, const Vocab& vocab, Mode mode,
                 std::mt19937& rng) const {
        const int n = s.size();
        std::vector<Tensor> parts;
        if (config.word_dim > 0) {
            std::vector<int> ids;
            for (const std::string& tok : s.tokens) ids.push_back(vocab.word_id(tok));
            parts.push_back(embed_rows(tape, word_table, ids));
        }
        if (config.pos_dim > 0) {
            if (s.pos.empty()) {
                parts.push_back(Tensor::zeros({n, config.pos_dim}, false));
            } else {
                std::vector<int> ids;
                for (const std::string& tag : s.pos) ids.push_back(vocab.pos_id(tag));
                parts.push_back(embed_rows(tape, pos_table, ids));
            }
        }
        if (config.lemma_dim > 0) {
            if (s.lemmas.empty()) {
                parts.push_back(Tensor::zeros({n, config.lemma_dim}, false));
            } else {
                std::vector<int> ids;
                for (const std::string& lemma : s.lemmas) ids.push_back(vocab.lemma_id(lemma));
                parts.push_back(embed_rows(tape, lemma_table, ids));
            }
        }
        if (config.char_dim > 0) {
            std::vector<Tensor> char_feats;
            for (const std::string& tok : s.tokens) {
                std::vector<int> ids;
                for (const std::string& c : utf8_chars(tok)) ids.push_back(vocab.char_id(c));
                Tensor chars = embed_rows(tape, char_table, ids);
                Tensor fwd = lstm_run(tape, char_fwd, chars);
                Tensor bwd = lstm_run(tape, char_bwd, chars, true);
                char_feats.push_back(concat_cols(
                    tape, {rows(tape, fwd, fwd.dim(0) - 1, 1), rows(tape, bwd, 0, 1)}));
            }
            parts.push_back(concat_rows(tape, char_feats));
        }
        if (config.ext_dim > 0) {
            if (!ext_table.defined())
                fail("encoder configured with ext_dim ", config.ext_dim,
                     " but no external vectors were loaded");
            std::vector<int> ids;
            for (const std::string& tok : s.tokens) ids.push_back(vocab.word_id(tok));
            parts.push_back(embed_rows(tape, ext_table, ids));
        }
        Tensor tokens = parts.size() == 1 ? parts[0] : concat_cols(tape, parts);
        Tensor all = concat_rows(tape, {root, tokens});
        return dropout(tape, all, config.dropout, mode, rng);
    }

    /// Stacked BiLSTM with dropout between layers in train mode.
    Tensor contextualize(Tape& tape, Tensor h, Mode mode, std::mt19937& rng) const {
        for (std::size_t layer = 0; layer < fwd_layers.size(); ++layer) {
            if (layer > 0) h = dropout(tape, h, config.dropout, mode, rng);
            h = bilstm_run(tape, fwd_layers[layer], bwd_layers[layer], h);
        }
        return h;
    }

    Tensor project_head(Tape& tape, const Tensor& h) const {
        return affine(tape, h, head_w, head_b);
    }
    Tensor project_dep(Tape& tape, const Tensor& h) const {
        return affine(tape, h, dep_w, dep_b);
    }
    Tensor project_mid(Tape& tape, const Tensor& h) const {
        return affine(tape, h, mid_w, mid_b);
    }

    /// Trainable parameters; the frozen external table is excluded.
    std::vector<Tensor> parameters() const {
        std::vector<Tensor> params;
        auto push = [&](const Tensor& t) {
            if (t.defined()) params.push_back(t);
        };
        auto push_lstm = [&](const LstmParams& p) {
            if (p.Wx.defined()) {
                params.push_back(p.Wx);
                params.push_back(p.Wh);
                params.push_back(p.b);
            }
        };
        push(word_table);
        push(pos_table);
        push(lemma_table);
        push(char_table);
        push_lstm(char_fwd);
        push_lstm(char_bwd);
        push(root);
        for (std::size_t i = 0; i < fwd_layers.size(); ++i) {
            push_lstm(fwd_layers[i]);
            push_lstm(bwd_layers[i]);
        }
        push(head_w);
        push(head_b);
        push(dep_w);
        push(dep_b);
        push(mid_w);
        push(mid_b);
        return params;
    }
};

} // namespace sfa
