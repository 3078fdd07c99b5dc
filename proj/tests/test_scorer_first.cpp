#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sfa/scorer_first.hpp"

using namespace sfa;

namespace {

oracle::Mat to_mat(const Tensor& t) {
    oracle::Mat m(static_cast<std::size_t>(t.dim(0)),
                  std::vector<double>(static_cast<std::size_t>(t.dim(1)), 0.0));
    for (int i = 0; i < t.dim(0); ++i)
        for (int j = 0; j < t.dim(1); ++j)
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t.at(i, j);
    return m;
}

Tensor identity(int d) {
    Tensor t = Tensor::zeros({d, d});
    for (int i = 0; i < d; ++i) t.at(i, i) = 1.0;
    return t;
}

// proj * W + b, by plain loops.
oracle::Mat naive_affine(const oracle::Mat& x, const oracle::Mat& w,
                         const std::vector<double>& b) {
    oracle::Mat out = oracle::naive_matmul(x, w);
    for (auto& row : out)
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    return out;
}

oracle::Mat transpose(const oracle::Mat& m) {
    oracle::Mat out(m[0].size(), std::vector<double>(m.size(), 0.0));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m[0].size(); ++j) out[j][i] = m[i][j];
    return out;
}

} // namespace

TEST_CASE("biaffine pinned forms", "[scorer1]") {
    // W = I: e1 W e2' = 0, e1 W e1' = 1.
    const int d = 3;
    Tensor hh = Tensor::zeros({1, d});
    Tensor hd = Tensor::zeros({1, d});
    hh.at(0, 0) = 1.0;
    hd.at(0, 1) = 1.0;
    Tape tape;
    Tensor s = bilinear(tape, hh, identity(d), hd);
    CHECK(s.at(0, 0) == 0.0);
    Tensor s2 = bilinear(tape, hh, identity(d), hh);
    CHECK(s2.at(0, 0) == 1.0);
}

TEST_CASE("biaffine matches the naive double-loop oracle", "[scorer1]") {
    std::mt19937 rng(41);
    for (int iter = 0; iter < 20; ++iter) {
        std::uniform_int_distribution<int> size(1, 5), dim(1, 4);
        const int n = size(rng), d = dim(rng);
        Tensor hh = Tensor::uniform({n, d}, 1.0, rng);
        Tensor hd = Tensor::uniform({n, d}, 1.0, rng);
        Tensor w = Tensor::uniform({d, d}, 1.0, rng);
        Tape tape;
        Tensor s = bilinear(tape, hh, w, hd);
        oracle::Mat expect =
            oracle::naive_matmul(oracle::naive_matmul(to_mat(hh), to_mat(w)), transpose(to_mat(hd)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                CHECK(std::abs(s.at(i, j) -
                               expect[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) <
                      1e-10);
    }
}

TEST_CASE("bias augmentation appends a constant-1 feature", "[scorer1]") {
    std::mt19937 rng(43);
    Tensor h = Tensor::uniform({3, 2}, 1.0, rng);
    Tape tape;
    Tensor a = augment_ones(tape, h);
    REQUIRE(a.shape() == std::vector<int>{3, 3});
    for (int i = 0; i < 3; ++i) {
        CHECK(a.at(i, 2) == 1.0);
        CHECK(a.at(i, 0) == h.at(i, 0));
    }
    // With zero W except the bias-bias cell, every score is that constant.
    Tensor w = Tensor::zeros({3, 3});
    w.at(2, 2) = 0.7;
    Tensor s = bilinear(tape, a, w, a);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(s.at(i, j) == 0.7);
}

TEST_CASE("sfa base scores with identity projections reduce to dot products", "[scorer1]") {
    std::mt19937 rng(47);
    const int n = 4, d = 3;
    Tensor hh = Tensor::uniform({n, d}, 1.0, rng);
    Tensor hd = Tensor::uniform({n, d}, 1.0, rng);
    SfaParams params = SfaParams::init(d, 1, 2, 2, rng);
    params.classes[0].P = identity(d);
    params.classes[0].pb = Tensor::zeros({d});
    Tape tape;
    Tensor s = sfa_scores(tape, hh, hd, params, false)[0];
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            double dot = 0.0;
            for (int q = 0; q < d; ++q) dot += hh.at(j, q) * hd.at(k, q);
            CHECK(std::abs(s.at(j, k) - dot) < 1e-12);
        }
}

TEST_CASE("sfa base scores have class-stacked shape and match the oracle", "[scorer1]") {
    std::mt19937 rng(53);
    const int n = 4, d = 3, c = 6; // n = 3 tokens + root
    Tensor hh = Tensor::uniform({n, d}, 1.0, rng);
    Tensor hd = Tensor::uniform({n, d}, 1.0, rng);
    SfaParams params = SfaParams::init(d, c, 2, 3, rng);
    Tape tape;
    Tensor stacked = sfa_base_scores(tape, hh, hd, params);
    REQUIRE(stacked.shape() == std::vector<int>{4, 4, 6});
    for (int cls = 0; cls < c; ++cls) {
        const SfaClassParams& cp = params.classes[static_cast<std::size_t>(cls)];
        std::vector<double> pb(static_cast<std::size_t>(d));
        for (int q = 0; q < d; ++q) pb[static_cast<std::size_t>(q)] = cp.pb.at(q);
        oracle::Mat ph = naive_affine(to_mat(hh), to_mat(cp.P), pb);
        oracle::Mat pd = naive_affine(to_mat(hd), to_mat(cp.P), pb);
        oracle::Mat expect = oracle::naive_matmul(ph, transpose(pd));
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                CHECK(std::abs(stacked.at(j, k, cls) -
                               expect[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]) <
                      1e-10);
    }
}

TEST_CASE("sfa attention hand trace for a single position", "[scorer1]") {
    std::mt19937 rng(59);
    const int d = 3;
    SfaParams params = SfaParams::init(d, 1, 4, 3, rng);
    Tensor h = Tensor::uniform({1, d}, 1.0, rng);
    Tape tape;
    auto [ah, ad] = sfa_attention(tape, h, h, params.classes[0], params.window);
    REQUIRE(ah.shape() == std::vector<int>{1});
    // softmax of one position = 1, max = 1, window of width 3 with zero pad = 1/3.
    CHECK(std::abs(ah.at(0) - 1.0 / 3.0) < 1e-15);
    CHECK(std::abs(ad.at(0) - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("uniform logits with a=1, t=1 give the uniform distribution", "[scorer1]") {
    std::mt19937 rng(61);
    const int n = 5, d = 3;
    SfaParams params = SfaParams::init(d, 1, 1, 1, rng);
    params.classes[0].Wah = Tensor::zeros({d, 1});
    params.classes[0].bah = Tensor::from({1}, {0.4});
    Tensor h = Tensor::uniform({n, d}, 1.0, rng);
    Tape tape;
    Tensor a = sfa_attention_stream(tape, h, params.classes[0].Wah, params.classes[0].bah, 1);
    for (int j = 0; j < n; ++j) CHECK(std::abs(a.at(j) - 1.0 / n) < 1e-15);
}

TEST_CASE("sfa attention equals the three-stage oracle", "[scorer1]") {
    std::mt19937 rng(67);
    for (int iter = 0; iter < 50; ++iter) {
        std::uniform_int_distribution<int> size(1, 8), heads(1, 4), window(1, 3), dim(1, 4);
        const int n = size(rng), a = heads(rng), t = window(rng), d = dim(rng);
        Tensor proj = Tensor::uniform({n, d}, 2.0, rng);
        Tensor w = Tensor::uniform({d, a}, 1.0, rng);
        Tensor b = Tensor::uniform({a}, 0.5, rng);
        std::vector<double> bv(static_cast<std::size_t>(a));
        for (int q = 0; q < a; ++q) bv[static_cast<std::size_t>(q)] = b.at(q);
        Tape tape;
        Tensor out = sfa_attention_stream(tape, proj, w, b, t);
        auto expect = oracle::sfa_attention_oracle(naive_affine(to_mat(proj), to_mat(w), bv), t);
        for (int j = 0; j < n; ++j)
            CHECK(std::abs(out.at(j) - expect[static_cast<std::size_t>(j)]) <= 1e-12);
    }
}

TEST_CASE("with a=1 and t=1 attention is the raw position softmax", "[scorer1]") {
    std::mt19937 rng(71);
    const int n = 6, d = 3;
    Tensor proj = Tensor::uniform({n, d}, 1.0, rng);
    Tensor w = Tensor::uniform({d, 1}, 1.0, rng);
    Tensor b = Tensor::uniform({1}, 1.0, rng);
    Tape tape;
    Tensor a = sfa_attention_stream(tape, proj, w, b, 1);
    Tensor logits = affine(tape, proj, w, b);
    Tensor soft = softmax_over_positions(tape, logits);
    for (int j = 0; j < n; ++j) CHECK(a.at(j) == soft.at(j, 0));
}

TEST_CASE("sfa mask identity, annihilation, and oracle", "[scorer1]") {
    std::mt19937 rng(73);
    const int n = 4;
    Tensor s = Tensor::uniform({n, n}, 2.0, rng);
    Tensor ones = Tensor::from({n}, std::vector<double>(n, 1.0));
    Tape tape;
    Tensor same = sfa_mask(tape, s, ones, ones);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) CHECK(same.at(j, k) == s.at(j, k));

    Tensor ah = Tensor::from({n}, {0.2, 0.0, 0.5, 0.9});
    Tensor ad = Tensor::from({n}, {0.4, 0.3, 0.1, 0.6});
    Tensor masked = sfa_mask(tape, s, ah, ad);
    for (int k = 0; k < n; ++k) CHECK(masked.at(1, k) == 0.0);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            CHECK(std::abs(masked.at(j, k) - s.at(j, k) * ah.at(j) * ad.at(k)) < 1e-15);
}

TEST_CASE("mask entries lie in (0,1) and never grow magnitudes", "[scorer1]") {
    std::mt19937 rng(79);
    for (int iter = 0; iter < 50; ++iter) {
        std::uniform_int_distribution<int> size(2, 8), heads(1, 4), window(1, 3);
        const int n = size(rng), d = 4;
        SfaParams params = SfaParams::init(d, 1, heads(rng), window(rng), rng);
        params.classes[0].bah = Tensor::uniform({params.heads}, 0.5, rng);
        params.classes[0].bad = Tensor::uniform({params.heads}, 0.5, rng);
        Tensor hh = Tensor::uniform({n, d}, 1.0, rng);
        Tensor hd = Tensor::uniform({n, d}, 1.0, rng);
        Tape tape;
        auto [ph, pd] = sfa_project(tape, hh, hd, params.classes[0]);
        Tensor base = sfa_base_score(tape, ph, pd);
        auto [ah, ad] = sfa_attention(tape, ph, pd, params.classes[0], params.window);
        Tensor masked = sfa_mask(tape, base, ah, ad);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double m = ah.at(j) * ad.at(k);
                CHECK(m > 0.0);
                CHECK(m < 1.0);
                CHECK(std::abs(masked.at(j, k)) <= std::abs(base.at(j, k)));
            }
    }
}

TEST_CASE("both scorer paths produce identical shapes", "[scorer1]") {
    std::mt19937 rng(83);
    Config config;
    config.proj_dim = 4;
    config.sfa_heads = 2;
    config.sfa_window = 2;
    const int c = 6, n = 5;
    FirstOrderScorer scorer = FirstOrderScorer::init(config, c, rng);
    Tensor hh = Tensor::uniform({n, config.proj_dim}, 1.0, rng);
    Tensor hd = Tensor::uniform({n, config.proj_dim}, 1.0, rng);

    Tape tape;
    config.use_sfa = true;
    ScoreSet sfa = scorer.score(tape, hh, hd, config);
    config.use_sfa = false;
    ScoreSet biaffine = scorer.score(tape, hh, hd, config);
    CHECK(sfa.edge.shape() == biaffine.edge.shape());
    CHECK(sfa.label.shape() == biaffine.label.shape());
    REQUIRE(sfa.edge.shape() == std::vector<int>{n, n});
    REQUIRE(sfa.label.shape() == std::vector<int>{n, n, c});

    // Masking off still yields the same shapes.
    config.use_sfa = true;
    config.sfa_mask_first = false;
    ScoreSet unmasked = scorer.score(tape, hh, hd, config);
    CHECK(unmasked.edge.shape() == sfa.edge.shape());
}

TEST_CASE("full sfa edge path passes the gradient check", "[scorer1]") {
    std::mt19937 rng(89);
    Config config;
    config.proj_dim = 3;
    config.sfa_heads = 2;
    config.sfa_window = 2;
    const int c = 2, n = 6; // 5 tokens + root
    FirstOrderScorer scorer = FirstOrderScorer::init(config, c, rng);
    Tensor hh = Tensor::uniform({n, config.proj_dim}, 1.0, rng);
    Tensor hd = Tensor::uniform({n, config.proj_dim}, 1.0, rng);

    auto f = [&](Tape& tape) {
        ScoreSet s = scorer.score(tape, hh, hd, config);
        return add(tape, sum(tape, s.edge), sum(tape, s.label));
    };
    std::vector<Tensor> inputs = scorer.parameters();
    inputs.push_back(hh);
    inputs.push_back(hd);
    CHECK(grad_check(f, inputs) < 1e-4);

    // Biaffine path too.
    config.use_sfa = false;
    CHECK(grad_check(f, inputs) < 1e-4);
}
