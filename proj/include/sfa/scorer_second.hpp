#pragma once

#include <random>
#include <vector>

#include "sfa/config.hpp"
#include "sfa/ops.hpp"
#include "sfa/scorer_first.hpp"

namespace sfa {

/// V_{ijk} = Σ_q fh_{iq} fm_{jq} fd_{kq} for factor matrices [n x r]:
/// the rank-r factorization of a dense trilinear form.
inline Tensor trilinear_join(Tape& tape, const Tensor& fh, const Tensor& fm, const Tensor& fd) {
    for (const Tensor* t : {&fh, &fm, &fd}) check_rank(*t, 2, "trilinear_join");
    const int n = fh.dim(0), r = fh.dim(1);
    if (fm.dim(0) != n || fd.dim(0) != n || fm.dim(1) != r || fd.dim(1) != r)
        fail("trilinear_join: factor shapes differ: ", shape_string(fh.shape()), " vs ",
             shape_string(fm.shape()), " vs ", shape_string(fd.shape()));
    Tensor out = Tensor::zeros({n, n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double acc = 0.0;
                for (int q = 0; q < r; ++q) acc += fh.at(i, q) * fm.at(j, q) * fd.at(k, q);
                out.at(i, j, k) = acc;
            }
    tape.record([fh, fm, fd, out]() mutable {
        const int n = fh.dim(0), r = fh.dim(1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double g = out.grad()[out.offset(i, j, k)];
                    if (g == 0.0) continue;
                    for (int q = 0; q < r; ++q) {
                        fh.grad_at(i, q) += g * fm.at(j, q) * fd.at(k, q);
                        fm.grad_at(j, q) += g * fh.at(i, q) * fd.at(k, q);
                        fd.grad_at(k, q) += g * fh.at(i, q) * fm.at(j, q);
                    }
                }
    });
    return out;
}

/// Zero every cell where two indices coincide; gradients there are
/// discarded as well.
inline Tensor zero_diagonal3(Tape& tape, const Tensor& v) {
    check_rank(v, 3, "zero_diagonal3");
    const int n = v.dim(0);
    Tensor out = Tensor::zeros({n, n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out.at(i, j, k) = (i == j || j == k || i == k) ? 0.0 : v.at(i, j, k);
    tape.record([v, out]() mutable {
        const int n = v.dim(0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    if (i != j && j != k && i != k)
                        v.grad_at(i, j, k) += out.grad()[out.offset(i, j, k)];
    });
    return out;
}

/// V ∘ (A^h ⊗ A^m ⊗ A^d).
inline Tensor triple_mask(Tape& tape, const Tensor& v, const Tensor& ah, const Tensor& am,
                          const Tensor& ad) {
    check_rank(v, 3, "triple_mask");
    const int n = v.dim(0);
    for (const Tensor* a : {&ah, &am, &ad})
        if (a->rank() != 1 || a->dim(0) != n)
            fail("triple_mask: attention shape ", shape_string(a->shape()),
                 " does not match potentials ", shape_string(v.shape()));
    Tensor out = Tensor::zeros({n, n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out.at(i, j, k) = v.at(i, j, k) * ah.at(i) * am.at(j) * ad.at(k);
    tape.record([v, ah, am, ad, out]() mutable {
        const int n = v.dim(0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double g = out.grad()[out.offset(i, j, k)];
                    if (g == 0.0) continue;
                    const double vv = v.at(i, j, k);
                    v.grad_at(i, j, k) += g * ah.at(i) * am.at(j) * ad.at(k);
                    ah.grad_at(i) += g * vv * am.at(j) * ad.at(k);
                    am.grad_at(j) += g * vv * ah.at(i) * ad.at(k);
                    ad.grad_at(k) += g * vv * ah.at(i) * am.at(j);
                }
    });
    return out;
}

/// One round of second-order messages into each edge:
/// m_{ij} = Σ_k q_{ik} Vs_{ijk} + q_{kj} Vc_{ijk} + q_{jk} Vg_{ijk}.
inline Tensor mfvi_message(Tape& tape, const Tensor& q, const Tensor& vs, const Tensor& vc,
                           const Tensor& vg) {
    const int n = q.dim(0);
    Tensor out = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += q.at(i, k) * vs.at(i, j, k) + q.at(k, j) * vc.at(i, j, k) +
                       q.at(j, k) * vg.at(i, j, k);
            out.at(i, j) = acc;
        }
    tape.record([q, vs, vc, vg, out]() mutable {
        const int n = q.dim(0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double g = out.grad()[out.offset(i, j)];
                if (g == 0.0) continue;
                for (int k = 0; k < n; ++k) {
                    q.grad_at(i, k) += g * vs.at(i, j, k);
                    vs.grad_at(i, j, k) += g * q.at(i, k);
                    q.grad_at(k, j) += g * vc.at(i, j, k);
                    vc.grad_at(i, j, k) += g * q.at(k, j);
                    q.grad_at(j, k) += g * vg.at(i, j, k);
                    vg.grad_at(i, j, k) += g * q.at(j, k);
                }
            }
    });
    return out;
}

/// Mean-field refinement unrolled on the tape. q⁰ = σ(S^e); each
/// iteration recomputes logits g = S^e + messages(q) and q = σ(g).
/// Returns the final logits (equal to S^e when iterations = 0).
inline Tensor mfvi(Tape& tape, const Tensor& s_edge, const Tensor& v_sib, const Tensor& v_cop,
                   const Tensor& v_grp, int iterations) {
    if (iterations < 0) fail("mfvi: iterations must be >= 0, got ", iterations);
    check_rank(s_edge, 2, "mfvi");
    Tensor logits = s_edge;
    for (int it = 0; it < iterations; ++it) {
        Tensor q = sigmoid(tape, logits);
        logits = add(tape, s_edge, mfvi_message(tape, q, v_sib, v_cop, v_grp));
    }
    return logits;
}

/// One relation's parameters: trilinear factors plus an SFA attention
/// set whose projection is shared across the three streams.
struct RelationParams {
    Tensor Uh, Um, Ud; // [d x r]
    Tensor P;          // [d x d]
    Tensor pb;         // [d]
    Tensor Wh, Wm, Wd; // [d x a]
    Tensor bh, bm, bd; // [a]

    static RelationParams init(int d, int rank, int heads, std::mt19937& rng) {
        RelationParams p;
        p.Uh = Tensor::glorot({d, rank}, rng);
        p.Um = Tensor::glorot({d, rank}, rng);
        p.Ud = Tensor::glorot({d, rank}, rng);
        p.P = Tensor::glorot({d, d}, rng);
        p.pb = Tensor::zeros({d});
        p.Wh = Tensor::glorot({d, heads}, rng);
        p.bh = Tensor::zeros({heads});
        p.Wm = Tensor::glorot({d, heads}, rng);
        p.bm = Tensor::zeros({heads});
        p.Wd = Tensor::glorot({d, heads}, rng);
        p.bd = Tensor::zeros({heads});
        return p;
    }
};

struct SecondOrderScorer {
    RelationParams sib, cop, grp;

    static SecondOrderScorer init(const Config& config, std::mt19937& rng) {
        SecondOrderScorer s;
        s.sib = RelationParams::init(config.proj_dim, config.second_order_rank, config.sfa_heads,
                                     rng);
        s.cop = RelationParams::init(config.proj_dim, config.second_order_rank, config.sfa_heads,
                                     rng);
        s.grp = RelationParams::init(config.proj_dim, config.second_order_rank, config.sfa_heads,
                                     rng);
        return s;
    }

    /// Low-rank trilinear scores for one relation over the three role
    /// representations.
    Tensor trilinear_scores(Tape& tape, const RelationParams& p, const Tensor& hh,
                            const Tensor& hm, const Tensor& hd) const {
        return trilinear_join(tape, matmul(tape, hh, p.Uh), matmul(tape, hm, p.Um),
                              matmul(tape, hd, p.Ud));
    }

    /// Potentials for one relation: trilinear scores, optional SFA
    /// triple mask, then diagonal zeroing.
    Tensor potentials(Tape& tape, const RelationParams& p, const Tensor& hh, const Tensor& hm,
                      const Tensor& hd, const Config& config) const {
        Tensor v = trilinear_scores(tape, p, hh, hm, hd);
        if (config.sfa_mask_second) {
            Tensor ah = sfa_attention_stream(tape, affine(tape, hh, p.P, p.pb), p.Wh, p.bh,
                                             config.sfa_window);
            Tensor am = sfa_attention_stream(tape, affine(tape, hm, p.P, p.pb), p.Wm, p.bm,
                                             config.sfa_window);
            Tensor ad = sfa_attention_stream(tape, affine(tape, hd, p.P, p.pb), p.Wd, p.bd,
                                             config.sfa_window);
            v = triple_mask(tape, v, ah, am, ad);
        }
        return zero_diagonal3(tape, v);
    }

    /// Full second-order path: three relation potentials feeding MFVI;
    /// returns refined edge logits.
    Tensor refine(Tape& tape, const Tensor& s_edge, const Tensor& hh, const Tensor& hm,
                  const Tensor& hd, const Config& config) const {
        Tensor vs = potentials(tape, sib, hh, hm, hd, config);
        Tensor vc = potentials(tape, cop, hh, hm, hd, config);
        Tensor vg = potentials(tape, grp, hh, hm, hd, config);
        return mfvi(tape, s_edge, vs, vc, vg, config.mfvi_iterations);
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> params;
        for (const RelationParams* p : {&sib, &cop, &grp})
            for (const Tensor& t :
                 {p->Uh, p->Um, p->Ud, p->P, p->pb, p->Wh, p->bh, p->Wm, p->bm, p->Wd, p->bd})
                params.push_back(t);
        return params;
    }
};

} // namespace sfa
