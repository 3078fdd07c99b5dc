#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "sfa/tensor.hpp"

namespace sfa {

inline void check_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank)
        fail(op, ": expected rank-", rank, " tensor, got shape ", shape_string(t.shape()));
}

/// out = a * b for a [n x k], b [k x m].
inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    check_rank(a, 2, "matmul");
    check_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0))
        fail("matmul: inner dimensions differ: ", shape_string(a.shape()), " vs ", shape_string(b.shape()));
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = a.at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < m; ++j) out.at(i, j) += av * b.at(p, j);
        }
    tape.record([a, b, out]() mutable {
        const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                const double g = out.grad()[out.offset(i, j)];
                if (g == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    a.grad_at(i, p) += g * b.at(p, j);
                    b.grad_at(p, j) += g * a.at(i, p);
                }
            }
    });
    return out;
}

/// out = a * b^T for a [n x k], b [m x k].
inline Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
    check_rank(a, 2, "matmul_nt");
    check_rank(b, 2, "matmul_nt");
    if (a.dim(1) != b.dim(1))
        fail("matmul_nt: inner dimensions differ: ", shape_string(a.shape()), " vs ", shape_string(b.shape()));
    const int n = a.dim(0), k = a.dim(1), m = b.dim(0);
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a.at(i, p) * b.at(j, p);
            out.at(i, j) = s;
        }
    tape.record([a, b, out]() mutable {
        const int n = a.dim(0), k = a.dim(1), m = b.dim(0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                const double g = out.grad()[out.offset(i, j)];
                if (g == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    a.grad_at(i, p) += g * b.at(j, p);
                    b.grad_at(j, p) += g * a.at(i, p);
                }
            }
    });
    return out;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        fail(op, ": shape mismatch: ", shape_string(a.shape()), " vs ", shape_string(b.shape()));
}

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] + b.value()[i];
    tape.record([a, b, out]() mutable {
        for (std::size_t i = 0; i < out.size(); ++i) {
            a.grad()[i] += out.grad()[i];
            b.grad()[i] += out.grad()[i];
        }
    });
    return out;
}

inline Tensor ewmul(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "ewmul");
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] * b.value()[i];
    tape.record([a, b, out]() mutable {
        for (std::size_t i = 0; i < out.size(); ++i) {
            a.grad()[i] += out.grad()[i] * b.value()[i];
            b.grad()[i] += out.grad()[i] * a.value()[i];
        }
    });
    return out;
}

inline Tensor scale(Tape& tape, const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] * c;
    tape.record([a, out, c]() mutable {
        for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad()[i] * c;
    });
    return out;
}

/// out = x * W + b with b broadcast over rows: x [n x k], W [k x m], b [m].
inline Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    check_rank(x, 2, "affine");
    check_rank(w, 2, "affine");
    check_rank(b, 1, "affine");
    if (x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0))
        fail("affine: shapes do not chain: ", shape_string(x.shape()), " * ", shape_string(w.shape()),
             " + ", shape_string(b.shape()));
    const int n = x.dim(0), k = x.dim(1), m = w.dim(1);
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) out.at(i, j) = b.at(j);
        for (int p = 0; p < k; ++p) {
            const double xv = x.at(i, p);
            if (xv == 0.0) continue;
            for (int j = 0; j < m; ++j) out.at(i, j) += xv * w.at(p, j);
        }
    }
    tape.record([x, w, b, out]() mutable {
        const int n = x.dim(0), k = x.dim(1), m = w.dim(1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                const double g = out.grad()[out.offset(i, j)];
                if (g == 0.0) continue;
                b.grad_at(j) += g;
                for (int p = 0; p < k; ++p) {
                    x.grad_at(i, p) += g * w.at(p, j);
                    w.grad_at(p, j) += g * x.at(i, p);
                }
            }
    });
    return out;
}

/// Concatenate along columns: parts all [n x d_i] -> [n x sum(d_i)].
inline Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) fail("concat_cols: no inputs");
    const int n = parts[0].dim(0);
    int total = 0;
    for (const Tensor& p : parts) {
        check_rank(p, 2, "concat_cols");
        if (p.dim(0) != n)
            fail("concat_cols: row count mismatch: ", shape_string(parts[0].shape()), " vs ", shape_string(p.shape()));
        total += p.dim(1);
    }
    Tensor out = Tensor::zeros({n, total});
    int col = 0;
    for (const Tensor& p : parts) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p.dim(1); ++j) out.at(i, col + j) = p.at(i, j);
        col += p.dim(1);
    }
    tape.record([parts, out]() mutable {
        const int n = out.dim(0);
        int col = 0;
        for (const Tensor& p : parts) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < p.dim(1); ++j) p.grad_at(i, j) += out.grad()[out.offset(i, col + j)];
            col += p.dim(1);
        }
    });
    return out;
}

/// Concatenate along rows: parts all [r_i x d] -> [sum(r_i) x d].
inline Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) fail("concat_rows: no inputs");
    const int d = parts[0].dim(1);
    int total = 0;
    for (const Tensor& p : parts) {
        check_rank(p, 2, "concat_rows");
        if (p.dim(1) != d)
            fail("concat_rows: column count mismatch: ", shape_string(parts[0].shape()), " vs ", shape_string(p.shape()));
        total += p.dim(0);
    }
    Tensor out = Tensor::zeros({total, d});
    int row = 0;
    for (const Tensor& p : parts) {
        for (int i = 0; i < p.dim(0); ++i)
            for (int j = 0; j < d; ++j) out.at(row + i, j) = p.at(i, j);
        row += p.dim(0);
    }
    tape.record([parts, out]() mutable {
        const int d = out.dim(1);
        int row = 0;
        for (const Tensor& p : parts) {
            for (int i = 0; i < p.dim(0); ++i)
                for (int j = 0; j < d; ++j) p.grad_at(i, j) += out.grad()[out.offset(row + i, j)];
            row += p.dim(0);
        }
    });
    return out;
}

/// Copy of rows [start, start+count) of x.
inline Tensor rows(Tape& tape, const Tensor& x, int start, int count) {
    check_rank(x, 2, "rows");
    if (start < 0 || count < 1 || start + count > x.dim(0))
        fail("rows: range [", start, ", ", start + count, ") out of bounds for ", shape_string(x.shape()));
    const int d = x.dim(1);
    Tensor out = Tensor::zeros({count, d});
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = x.at(start + i, j);
    tape.record([x, out, start]() mutable {
        const int d = x.dim(1);
        for (int i = 0; i < out.dim(0); ++i)
            for (int j = 0; j < d; ++j) x.grad_at(start + i, j) += out.grad()[out.offset(i, j)];
    });
    return out;
}

/// Copy of columns [start, start+count) of x.
inline Tensor cols(Tape& tape, const Tensor& x, int start, int count) {
    check_rank(x, 2, "cols");
    if (start < 0 || count < 1 || start + count > x.dim(1))
        fail("cols: range [", start, ", ", start + count, ") out of bounds for ", shape_string(x.shape()));
    const int n = x.dim(0);
    Tensor out = Tensor::zeros({n, count});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < count; ++j) out.at(i, j) = x.at(i, start + j);
    tape.record([x, out, start]() mutable {
        for (int i = 0; i < out.dim(0); ++i)
            for (int j = 0; j < out.dim(1); ++j) x.grad_at(i, start + j) += out.grad()[out.offset(i, j)];
    });
    return out;
}

inline Tensor sigmoid(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.value()[i];
        out.value()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    tape.record([x, out]() mutable {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double s = out.value()[i];
            x.grad()[i] += out.grad()[i] * s * (1.0 - s);
        }
    });
    return out;
}

inline Tensor tanh(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.value()[i] = std::tanh(x.value()[i]);
    tape.record([x, out]() mutable {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double t = out.value()[i];
            x.grad()[i] += out.grad()[i] * (1.0 - t * t);
        }
    });
    return out;
}

/// Inverted dropout: identity in eval mode, zero-with-probability-p and
/// scale by 1/(1-p) in train mode. Mask is resampled per call.
inline Tensor dropout(Tape& tape, const Tensor& x, double p, Mode mode, std::mt19937& rng) {
    if (p < 0.0 || p >= 1.0) fail("dropout: rate must lie in [0, 1), got ", p);
    if (mode == Mode::Eval || p == 0.0) {
        Tensor out = Tensor::zeros(x.shape());
        out.value() = x.value();
        tape.record([x, out]() mutable {
            for (std::size_t i = 0; i < out.size(); ++i) x.grad()[i] += out.grad()[i];
        });
        return out;
    }
    const double keep = 1.0 - p;
    auto mask = std::make_shared<std::vector<double>>(x.size());
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) (*mask)[i] = dist(rng) < p ? 0.0 : 1.0 / keep;
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.value()[i] = x.value()[i] * (*mask)[i];
    tape.record([x, out, mask]() mutable {
        for (std::size_t i = 0; i < out.size(); ++i) x.grad()[i] += out.grad()[i] * (*mask)[i];
    });
    return out;
}

/// Column-wise softmax over sequence positions: input [n x a], every
/// column sums to 1. Max-subtraction keeps exp() in range.
inline Tensor softmax_over_positions(Tape& tape, const Tensor& e) {
    check_rank(e, 2, "softmax_over_positions");
    const int n = e.dim(0), a = e.dim(1);
    Tensor out = Tensor::zeros({n, a});
    for (int j = 0; j < a; ++j) {
        double mx = e.at(0, j);
        for (int i = 1; i < n; ++i) mx = std::max(mx, e.at(i, j));
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += std::exp(e.at(i, j) - mx);
        for (int i = 0; i < n; ++i) out.at(i, j) = std::exp(e.at(i, j) - mx) / sum;
    }
    tape.record([e, out]() mutable {
        const int n = e.dim(0), a = e.dim(1);
        for (int j = 0; j < a; ++j) {
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += out.grad()[out.offset(i, j)] * out.at(i, j);
            for (int i = 0; i < n; ++i)
                e.grad_at(i, j) += out.at(i, j) * (out.grad()[out.offset(i, j)] - dot);
        }
    });
    return out;
}

/// Per position, max over the head columns: [n x a] -> [n]. Gradient is
/// routed to the lowest-index argmax.
inline Tensor max_over_heads(Tape& tape, const Tensor& x) {
    check_rank(x, 2, "max_over_heads");
    const int n = x.dim(0), a = x.dim(1);
    Tensor out = Tensor::zeros({n});
    auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int j = 1; j < a; ++j)
            if (x.at(i, j) > x.at(i, best)) best = j;
        (*argmax)[static_cast<std::size_t>(i)] = best;
        out.at(i) = x.at(i, best);
    }
    tape.record([x, out, argmax]() mutable {
        for (int i = 0; i < out.dim(0); ++i)
            x.grad_at(i, (*argmax)[static_cast<std::size_t>(i)]) += out.grad()[static_cast<std::size_t>(i)];
    });
    return out;
}

/// Forward-looking sliding-window mean of width t: out[j] is the mean of
/// x[j..j+t-1] with positions past the end contributing zero; the divisor
/// stays t.
inline Tensor window_mean(Tape& tape, const Tensor& x, int t) {
    check_rank(x, 1, "window_mean");
    if (t < 1) fail("window_mean: window size must be >= 1, got ", t);
    const int n = x.dim(0);
    Tensor out = Tensor::zeros({n});
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < t && j + k < n; ++k) s += x.at(j + k);
        out.at(j) = s / static_cast<double>(t);
    }
    tape.record([x, out, t]() mutable {
        const int n = x.dim(0);
        for (int j = 0; j < n; ++j) {
            const double g = out.grad()[static_cast<std::size_t>(j)] / static_cast<double>(t);
            for (int k = 0; k < t && j + k < n; ++k) x.grad_at(j + k) += g;
        }
    });
    return out;
}

inline Tensor sum(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros({1});
    double s = 0.0;
    for (double v : x.value()) s += v;
    out.at(0) = s;
    tape.record([x, out]() mutable {
        const double g = out.grad()[0];
        for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
    });
    return out;
}

inline Tensor mean(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros({1});
    double s = 0.0;
    for (double v : x.value()) s += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    out.at(0) = s * inv;
    tape.record([x, out, inv]() mutable {
        const double g = out.grad()[0] * inv;
        for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
    });
    return out;
}

/// Outer product u[n] x v[m] -> [n x m].
inline Tensor outer(Tape& tape, const Tensor& u, const Tensor& v) {
    check_rank(u, 1, "outer");
    check_rank(v, 1, "outer");
    const int n = u.dim(0), m = v.dim(0);
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(i, j) = u.at(i) * v.at(j);
    tape.record([u, v, out]() mutable {
        const int n = u.dim(0), m = v.dim(0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                const double g = out.grad()[out.offset(i, j)];
                u.grad_at(i) += g * v.at(j);
                v.grad_at(j) += g * u.at(i);
            }
    });
    return out;
}

/// Stack c matrices [n x m] into [n x m x c], class index last.
inline Tensor stack_last(Tape& tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) fail("stack_last: no inputs");
    const int n = parts[0].dim(0), m = parts[0].dim(1);
    const int c = static_cast<int>(parts.size());
    for (const Tensor& p : parts) check_same_shape(p, parts[0], "stack_last");
    Tensor out = Tensor::zeros({n, m, c});
    for (int k = 0; k < c; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) out.at(i, j, k) = parts[static_cast<std::size_t>(k)].at(i, j);
    tape.record([parts, out]() mutable {
        const int n = out.dim(0), m = out.dim(1), c = out.dim(2);
        for (int k = 0; k < c; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    parts[static_cast<std::size_t>(k)].grad_at(i, j) += out.grad()[out.offset(i, j, k)];
    });
    return out;
}

/// Row lookup: out[r, :] = table[ids[r], :].
inline Tensor embed_rows(Tape& tape, const Tensor& table, const std::vector<int>& ids) {
    check_rank(table, 2, "embed_rows");
    const int d = table.dim(1);
    const int n = static_cast<int>(ids.size());
    for (int id : ids)
        if (id < 0 || id >= table.dim(0))
            fail("embed_rows: index ", id, " out of range for table ", shape_string(table.shape()));
    Tensor out = Tensor::zeros({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = table.at(ids[static_cast<std::size_t>(i)], j);
    tape.record([table, out, ids]() mutable {
        const int d = table.dim(1);
        for (int i = 0; i < out.dim(0); ++i)
            for (int j = 0; j < d; ++j) table.grad_at(ids[static_cast<std::size_t>(i)], j) += out.grad()[out.offset(i, j)];
    });
    return out;
}

/// Gather cells of a rank-3 tensor [n x m x c] at the given (i, j)
/// positions, producing one c-wide row per cell.
inline Tensor gather_cells(Tape& tape, const Tensor& x,
                           const std::vector<std::pair<int, int>>& cells) {
    check_rank(x, 3, "gather_cells");
    if (cells.empty()) fail("gather_cells: empty cell list");
    const int c = x.dim(2);
    const int g = static_cast<int>(cells.size());
    for (auto [i, j] : cells)
        if (i < 0 || i >= x.dim(0) || j < 0 || j >= x.dim(1))
            fail("gather_cells: cell (", i, ", ", j, ") out of range for ",
                 shape_string(x.shape()));
    Tensor out = Tensor::zeros({g, c});
    for (int r = 0; r < g; ++r)
        for (int k = 0; k < c; ++k)
            out.at(r, k) = x.at(cells[static_cast<std::size_t>(r)].first,
                                cells[static_cast<std::size_t>(r)].second, k);
    tape.record([x, out, cells]() mutable {
        const int c = x.dim(2);
        for (int r = 0; r < out.dim(0); ++r)
            for (int k = 0; k < c; ++k)
                x.grad_at(cells[static_cast<std::size_t>(r)].first,
                          cells[static_cast<std::size_t>(r)].second, k) +=
                    out.grad()[out.offset(r, k)];
    });
    return out;
}

/// Mean binary cross-entropy from logits against per-cell 0/1 targets.
/// Uses the max(x,0) - x*z + log1p(exp(-|x|)) form.
inline Tensor cross_entropy(Tape& tape, const Tensor& logits, const Tensor& targets01) {
    check_same_shape(logits, targets01, "cross_entropy");
    const std::size_t n = logits.size();
    Tensor out = Tensor::zeros({1});
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = logits.value()[i];
        const double z = targets01.value()[i];
        total += std::max(x, 0.0) - x * z + std::log1p(std::exp(-std::abs(x)));
    }
    out.at(0) = total / static_cast<double>(n);
    tape.record([logits, targets01, out]() mutable {
        const std::size_t n = logits.size();
        const double g = out.grad()[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = logits.value()[i];
            const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            logits.grad()[i] += g * (s - targets01.value()[i]);
        }
    });
    return out;
}

/// Mean categorical cross-entropy over rows: logits [m x c] (or [c] for a
/// single row), one target class index per row.
inline Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& targets) {
    const int m = logits.rank() == 1 ? 1 : logits.dim(0);
    const int c = logits.rank() == 1 ? logits.dim(0) : logits.dim(1);
    if (logits.rank() > 2) fail("cross_entropy: expected rank-1 or rank-2 logits, got ", shape_string(logits.shape()));
    if (static_cast<int>(targets.size()) != m)
        fail("cross_entropy: ", targets.size(), " targets for ", m, " rows");
    for (int t : targets)
        if (t < 0 || t >= c) fail("cross_entropy: target class ", t, " out of range [0, ", c, ")");
    Tensor out = Tensor::zeros({1});
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        double mx = logits.value()[static_cast<std::size_t>(i * c)];
        for (int j = 1; j < c; ++j) mx = std::max(mx, logits.value()[static_cast<std::size_t>(i * c + j)]);
        double lse = 0.0;
        for (int j = 0; j < c; ++j) lse += std::exp(logits.value()[static_cast<std::size_t>(i * c + j)] - mx);
        lse = std::log(lse) + mx;
        total += lse - logits.value()[static_cast<std::size_t>(i * c + targets[static_cast<std::size_t>(i)])];
    }
    out.at(0) = total / static_cast<double>(m);
    tape.record([logits, out, targets, m, c]() mutable {
        const double g = out.grad()[0] / static_cast<double>(m);
        for (int i = 0; i < m; ++i) {
            double mx = logits.value()[static_cast<std::size_t>(i * c)];
            for (int j = 1; j < c; ++j) mx = std::max(mx, logits.value()[static_cast<std::size_t>(i * c + j)]);
            double lse = 0.0;
            for (int j = 0; j < c; ++j) lse += std::exp(logits.value()[static_cast<std::size_t>(i * c + j)] - mx);
            for (int j = 0; j < c; ++j) {
                const double p = std::exp(logits.value()[static_cast<std::size_t>(i * c + j)] - mx) / lse;
                const double ind = j == targets[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                logits.grad()[static_cast<std::size_t>(i * c + j)] += g * (p - ind);
            }
        }
    });
    return out;
}

/// Worst relative error between the reverse-mode gradient of f and central
/// finite differences, over every element of every tensor in `inputs`.
/// Relative error uses denominator max(|analytic|, |numeric|, 1e-4);
/// the floor keeps central-difference roundoff (which dominates both
/// sides for parameters f is exactly invariant to, such as a bias fed
/// only into a softmax) from registering as disagreement, while any
/// real mismatch above 1e-8 absolute still exceeds a 1e-4 bound.
inline double grad_check(const std::function<Tensor(Tape&)>& f, const std::vector<Tensor>& inputs,
                         double h = 1e-5) {
    Tape tape;
    Tensor out = f(tape);
    if (out.size() != 1)
        fail("grad_check: f must produce a scalar, got shape ", shape_string(out.shape()));
    for (const Tensor& x : inputs) x.zero_grad();
    tape.backward(out);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const Tensor& x : inputs) analytic.push_back(x.grad());

    double worst = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        Tensor x = inputs[t];
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x.value()[i];
            x.value()[i] = saved + h;
            Tape tp;
            const double fp = f(tp).at(0);
            x.value()[i] = saved - h;
            Tape tm;
            const double fm = f(tm).at(0);
            x.value()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[t][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

inline double grad_check(const std::function<Tensor(Tape&)>& f, const Tensor& x, double h = 1e-5) {
    return grad_check(f, std::vector<Tensor>{x}, h);
}

} // namespace sfa
