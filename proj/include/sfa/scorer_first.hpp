#pragma once

#include <random>
#include <utility>
#include <vector>

#include "sfa/config.hpp"
#include "sfa/ops.hpp"

namespace sfa {

/// Parameters of one SFA class: the projection pair shared by the head
/// and dependent streams plus per-stream attention maps.
struct SfaClassParams {
    Tensor P;  // [d x d]
    Tensor pb; // [d]
    Tensor Wah, Wad; // [d x a]
    Tensor bah, bad; // [a]
};

struct SfaParams {
    int heads = 1;
    int window = 1;
    std::vector<SfaClassParams> classes;

    static SfaParams init(int d, int c, int heads, int window, std::mt19937& rng) {
        if (heads < 1) fail("sfa: attention heads must be >= 1, got ", heads);
        if (window < 1) fail("sfa: window width must be >= 1, got ", window);
        SfaParams p;
        p.heads = heads;
        p.window = window;
        for (int i = 0; i < c; ++i) {
            SfaClassParams cp;
            cp.P = Tensor::glorot({d, d}, rng);
            cp.pb = Tensor::zeros({d});
            cp.Wah = Tensor::glorot({d, heads}, rng);
            cp.bah = Tensor::zeros({heads});
            cp.Wad = Tensor::glorot({d, heads}, rng);
            cp.bad = Tensor::zeros({heads});
            p.classes.push_back(cp);
        }
        return p;
    }
};

/// Project both streams through the class's shared affine map.
inline std::pair<Tensor, Tensor> sfa_project(Tape& tape, const Tensor& hh, const Tensor& hd,
                                             const SfaClassParams& cp) {
    return {affine(tape, hh, cp.P, cp.pb), affine(tape, hd, cp.P, cp.pb)};
}

/// Dot-product base scores: S_{jk} = <ph_j, pd_k>.
inline Tensor sfa_base_score(Tape& tape, const Tensor& ph, const Tensor& pd) {
    return matmul_nt(tape, ph, pd);
}

/// The three attention stages for one stream: position softmax per head
/// column, max across heads, forward sliding-window mean.
inline Tensor sfa_attention_stream(Tape& tape, const Tensor& projected, const Tensor& w,
                                   const Tensor& b, int window) {
    Tensor logits = affine(tape, projected, w, b); // [n x a]
    Tensor probs = softmax_over_positions(tape, logits);
    Tensor pooled = max_over_heads(tape, probs); // [n]
    return window_mean(tape, pooled, window);
}

/// Head and dependent attention vectors for one class.
inline std::pair<Tensor, Tensor> sfa_attention(Tape& tape, const Tensor& ph, const Tensor& pd,
                                               const SfaClassParams& cp, int window) {
    return {sfa_attention_stream(tape, ph, cp.Wah, cp.bah, window),
            sfa_attention_stream(tape, pd, cp.Wad, cp.bad, window)};
}

/// S := S ∘ (A^h ⊗ A^d).
inline Tensor sfa_mask(Tape& tape, const Tensor& s, const Tensor& ah, const Tensor& ad) {
    return ewmul(tape, s, outer(tape, ah, ad));
}

/// Per-class score matrices, masked when requested.
inline std::vector<Tensor> sfa_scores(Tape& tape, const Tensor& hh, const Tensor& hd,
                                      const SfaParams& params, bool mask) {
    std::vector<Tensor> out;
    for (const SfaClassParams& cp : params.classes) {
        auto [ph, pd] = sfa_project(tape, hh, hd, cp);
        Tensor s = sfa_base_score(tape, ph, pd);
        if (mask) {
            auto [ah, ad] = sfa_attention(tape, ph, pd, cp, params.window);
            s = sfa_mask(tape, s, ah, ad);
        }
        out.push_back(s);
    }
    return out;
}

/// Class-stacked raw scores [n x n x c], without attention masking.
inline Tensor sfa_base_scores(Tape& tape, const Tensor& hh, const Tensor& hd,
                              const SfaParams& params) {
    return stack_last(tape, sfa_scores(tape, hh, hd, params, false));
}

/// Append a constant-1 column so the bilinear form gains bias terms.
inline Tensor augment_ones(Tape& tape, const Tensor& x) {
    Tensor ones = Tensor::zeros({x.dim(0), 1}, false);
    for (int i = 0; i < x.dim(0); ++i) ones.at(i, 0) = 1.0;
    return concat_cols(tape, {x, ones});
}

/// a W bᵀ for row-major stacks of representations.
inline Tensor bilinear(Tape& tape, const Tensor& a, const Tensor& w, const Tensor& b) {
    return matmul_nt(tape, matmul(tape, a, w), b);
}

struct BiaffineParams {
    bool bias = true;
    Tensor We;              // [d1 x d1] with d1 = d + (bias ? 1 : 0)
    std::vector<Tensor> Wl; // c matrices [d1 x d1]

    static BiaffineParams init(int d, int c, bool bias, std::mt19937& rng) {
        BiaffineParams p;
        p.bias = bias;
        const int d1 = d + (bias ? 1 : 0);
        p.We = Tensor::glorot({d1, d1}, rng);
        for (int i = 0; i < c; ++i) p.Wl.push_back(Tensor::glorot({d1, d1}, rng));
        return p;
    }
};

/// Edge logits plus class-stacked label logits; both scorer paths
/// produce these exact shapes.
struct ScoreSet {
    Tensor edge;  // [(n+1) x (n+1)]
    Tensor label; // [(n+1) x (n+1) x c]
};

struct FirstOrderScorer {
    BiaffineParams biaffine;
    SfaParams sfa_edge;  // c = 1
    SfaParams sfa_label; // c = label count

    static FirstOrderScorer init(const Config& config, int label_count, std::mt19937& rng) {
        FirstOrderScorer s;
        s.biaffine = BiaffineParams::init(config.proj_dim, label_count, config.biaffine_bias, rng);
        s.sfa_edge = SfaParams::init(config.proj_dim, 1, config.sfa_heads, config.sfa_window, rng);
        s.sfa_label =
            SfaParams::init(config.proj_dim, label_count, config.sfa_heads, config.sfa_window, rng);
        return s;
    }

    ScoreSet score(Tape& tape, const Tensor& hh, const Tensor& hd, const Config& config) const {
        ScoreSet out;
        if (config.use_sfa) {
            out.edge = sfa_scores(tape, hh, hd, sfa_edge, config.sfa_mask_first)[0];
            out.label = stack_last(tape, sfa_scores(tape, hh, hd, sfa_label, config.sfa_mask_first));
        } else {
            Tensor ah = biaffine.bias ? augment_ones(tape, hh) : hh;
            Tensor ad = biaffine.bias ? augment_ones(tape, hd) : hd;
            out.edge = bilinear(tape, ah, biaffine.We, ad);
            std::vector<Tensor> slices;
            for (const Tensor& wl : biaffine.Wl) slices.push_back(bilinear(tape, ah, wl, ad));
            out.label = stack_last(tape, slices);
        }
        return out;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> params{biaffine.We};
        for (const Tensor& wl : biaffine.Wl) params.push_back(wl);
        for (const SfaParams* sp : {&sfa_edge, &sfa_label})
            for (const SfaClassParams& cp : sp->classes)
                for (const Tensor& t : {cp.P, cp.pb, cp.Wah, cp.bah, cp.Wad, cp.bad})
                    params.push_back(t);
        return params;
    }
};

} // namespace sfa
