// Independent reference implementations used as test oracles. Everything
// here is written from the defining formulas with plain loops and stays
// independent of the library code paths it checks.
#pragma once

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat naive_matmul(const Mat& a, const Mat& b) {
    const std::size_t n = a.size(), k = b.size(), m = b[0].size();
    Mat out(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t p = 0; p < k; ++p) out[i][j] += a[i][p] * b[p][j];
    return out;
}

// Direct exp/sum softmax down each column of an [n x a] matrix.
inline Mat naive_softmax_columns(const Mat& e) {
    const std::size_t n = e.size(), a = e[0].size();
    Mat out(n, std::vector<double>(a, 0.0));
    for (std::size_t j = 0; j < a; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += std::exp(e[i][j]);
        for (std::size_t i = 0; i < n; ++i) out[i][j] = std::exp(e[i][j]) / sum;
    }
    return out;
}

inline std::vector<double> naive_max_over_heads(const Mat& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double mx = x[i][0];
        for (double v : x[i]) mx = std::max(mx, v);
        out[i] = mx;
    }
    return out;
}

// Forward window of width t, zero past the end, divisor fixed at t.
inline std::vector<double> naive_window_mean(const std::vector<double>& x, int t) {
    const int n = static_cast<int>(x.size());
    std::vector<double> out(x.size(), 0.0);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < t; ++k)
            if (j + k < n) s += x[static_cast<std::size_t>(j + k)];
        out[static_cast<std::size_t>(j)] = s / t;
    }
    return out;
}

// The full three-stage attention pipeline: position softmax per head
// column, max across heads, sliding-window mean.
inline std::vector<double> sfa_attention_oracle(const Mat& logits, int t) {
    return naive_window_mean(naive_max_over_heads(naive_softmax_columns(logits)), t);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

using Cube = std::vector<Mat>; // [i][j][k]

inline Cube make_cube(std::size_t n, double v = 0.0) {
    return Cube(n, Mat(n, std::vector<double>(n, v)));
}

// Mean-field update loop, written directly from the update rule with
// triple loops. Returns the final logits.
inline Mat mfvi_oracle(const Mat& s_edge, const Cube& v_sib, const Cube& v_cop, const Cube& v_grp,
                       int iterations) {
    const std::size_t n = s_edge.size();
    Mat logits = s_edge;
    for (int it = 0; it < iterations; ++it) {
        Mat q(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) q[i][j] = sigmoid(logits[i][j]);
        Mat next(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = s_edge[i][j];
                for (std::size_t k = 0; k < n; ++k)
                    acc += q[i][k] * v_sib[i][j][k] + q[k][j] * v_cop[i][j][k] + q[j][k] * v_grp[i][j][k];
                next[i][j] = acc;
            }
        logits = next;
    }
    return logits;
}

// Dense trilinear form V_ijk = sum_{abc} Hh[i][a] Hm[j][b] Hd[k][c] W[a][b][c]
// with W assembled from the rank factors: W = sum_q Uh[:,q] x Um[:,q] x Ud[:,q].
inline Cube dense_trilinear_oracle(const Mat& hh, const Mat& hm, const Mat& hd, const Mat& uh,
                                   const Mat& um, const Mat& ud) {
    const std::size_t n = hh.size(), d = hh[0].size(), r = uh[0].size();
    std::vector<std::vector<std::vector<double>>> w(d, Mat(d, std::vector<double>(d, 0.0)));
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            for (std::size_t c = 0; c < d; ++c)
                for (std::size_t q = 0; q < r; ++q) w[a][b][c] += uh[a][q] * um[b][q] * ud[c][q];
    Cube v = make_cube(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                double acc = 0.0;
                for (std::size_t a = 0; a < d; ++a)
                    for (std::size_t b = 0; b < d; ++b)
                        for (std::size_t c = 0; c < d; ++c)
                            acc += hh[i][a] * hm[j][b] * hd[k][c] * w[a][b][c];
                v[i][j][k] = acc;
            }
    return v;
}

inline Mat random_mat(std::size_t n, std::size_t m, std::mt19937& rng, double range = 1.0) {
    std::uniform_real_distribution<double> dist(-range, range);
    Mat out(n, std::vector<double>(m, 0.0));
    for (auto& row : out)
        for (double& v : row) v = dist(rng);
    return out;
}

inline Cube random_cube(std::size_t n, std::mt19937& rng, double range = 1.0) {
    std::uniform_real_distribution<double> dist(-range, range);
    Cube out = make_cube(n);
    for (auto& plane : out)
        for (auto& row : plane)
            for (double& v : row) v = dist(rng);
    return out;
}

} // namespace oracle
