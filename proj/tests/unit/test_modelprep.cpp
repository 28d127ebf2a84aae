#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "plancad/errors.hpp"
#include "plancad/modelprep.hpp"

using namespace plancad;
using namespace plancad::modelprep;
using geometry::Primitive;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) { return random_matrix(rng, n, 1, scale).col(0); }

oracle::Mat to_rows(const Matrix& m) {
    oracle::Mat out(m.rows(), std::vector<double>(m.cols()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

FeatureGrid random_grid(std::mt19937_64& rng, int h, int w, int c) {
    FeatureGrid g(h, w, c, 14.0);
    std::uniform_real_distribution<double> u(-3, 3);
    for (double& v : g.values) v = u(rng);
    return g;
}

LossInputs random_loss_inputs(std::mt19937_64& rng, int n, int k, int q) {
    LossInputs in;
    in.class_logits = random_matrix(rng, n, k);
    for (int i = 0; i < n; ++i) in.class_targets.push_back(static_cast<int>(rng() % k));
    in.mask_logits = random_matrix(rng, q, n, 2.0);
    in.mask_targets = Matrix::Zero(q, n);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < n; ++j) in.mask_targets(i, j) = rng() % 2;
    return in;
}

}  // namespace

TEST_CASE("tokens") {
    const auto line = tokenize(Primitive::line({0, 0}, {2, 0}, "l"));
    CHECK(line.center == Vec2{1, 0});
    CHECK(line.length == 2.0);
    CHECK(line.orientation == 0.0);
    CHECK(line.type_one_hot == std::array<double, 4>{1, 0, 0, 0});

    const auto circle = tokenize(Primitive::circle({3, 3}, 1, "c"));
    CHECK(circle.center == Vec2{3, 3});
    CHECK(circle.orientation == 0.0);
    CHECK(circle.type_one_hot[2] == 1.0);

    // direction is folded into [0, pi)
    const auto back = tokenize(Primitive::poly_seg({2, 2}, {0, 0}, "p"));
    CHECK(back.orientation == doctest::Approx(std::numbers::pi / 4));
    CHECK(back.type_one_hot[3] == 1.0);

    const auto arc = tokenize(Primitive::arc({0, 0}, 1, 0, std::numbers::pi, "a"));
    CHECK(arc.center.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(arc.center.y == doctest::Approx(1.0));

    const Matrix m = token_matrix({line, circle});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == PointToken::kDim);
    CHECK(m(1, 0) == 3.0);
}

TEST_CASE("bilinear sampling") {
    FeatureGrid g(2, 2, 1, 2.0);  // pixel pitch 1 m, centers at 0.5 and 1.5
    g.at(0, 0, 0) = 1.0;
    g.at(0, 1, 0) = 3.0;
    g.at(1, 0, 0) = 5.0;
    g.at(1, 1, 0) = 7.0;
    const Matrix s = sample_features(g, {{0.5, 0.5}, {1.0, 0.5}, {1.0, 1.0}, {-50, -50}, {50, 0.5}, {1.5, 1.5}});
    CHECK(s(0, 0) == 1.0);
    CHECK(s(1, 0) == 2.0);
    CHECK(s(2, 0) == 4.0);
    CHECK(s(3, 0) == 1.0);
    CHECK(s(4, 0) == 3.0);
    CHECK(s(5, 0) == 7.0);
}

TEST_CASE("pixel centers reproduce values exactly and sampling is linear") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const int h = 7 + trial, w = 9 + 2 * trial, c = 3;
        const FeatureGrid f = random_grid(rng, h, w, c), g = random_grid(rng, h, w, c);
        std::vector<Vec2> centers;
        for (int row = 0; row < h; ++row)
            for (int col = 0; col < w; ++col) centers.push_back({(col + 0.5) * 14.0 / w, (row + 0.5) * 14.0 / h});
        const Matrix s = sample_features(f, centers);
        bool exact = true;
        for (int row = 0; row < h; ++row)
            for (int col = 0; col < w; ++col)
                for (int ch = 0; ch < c; ++ch) exact &= s(row * w + col, ch) == f.at(row, col, ch);
        CHECK(exact);

        std::uniform_real_distribution<double> u(-1, 15);
        std::vector<Vec2> pts;
        for (int k = 0; k < 200; ++k) pts.push_back({u(rng), u(rng)});
        const double a = 0.7, b = -1.3;
        FeatureGrid mix(h, w, c, 14.0);
        for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = a * f.values[i] + b * g.values[i];
        const Matrix lhs = sample_features(mix, pts);
        const Matrix rhs = a * sample_features(f, pts) + b * sample_features(g, pts);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("fusion with zero parameters gates at one half") {
    const auto p = FusionParams::zeros(4, 3, 2);
    Vector x(3), v(2);
    x << 1, -2, 3;
    v << 4, -6;
    const auto r = adaptive_fuse_full(p, x, v);
    CHECK(r.gate.size() == 1);
    CHECK(r.gate(0) == 0.5);
    Vector expect(5);
    expect << 1, -2, 3, 2, -3;
    CHECK(r.u == expect);

    FusionParams ones;
    ones.w1 = Matrix::Ones(1, 1);
    ones.w2 = Matrix::Ones(1, 1);
    ones.w3 = Matrix::Ones(1, 1);
    CHECK(adaptive_fuse_full(ones, Vector::Zero(1), Vector::Zero(1)).gate(0) == 0.5);
}

TEST_CASE("fusion matches a straight-line evaluation") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        for (GateMode mode : {GateMode::Scalar, GateMode::PerChannel}) {
            FusionParams p;
            p.mode = mode;
            p.w1 = random_matrix(rng, mode == GateMode::Scalar ? 1 : 2, 4);
            p.w2 = random_matrix(rng, 4, 3);
            p.w3 = random_matrix(rng, 4, 2);
            const Vector x = random_vector(rng, 3), v = random_vector(rng, 2);
            const Vector u = adaptive_fuse(p, x, v);
            const auto ref = oracle::fuse(to_rows(p.w1), to_rows(p.w2), to_rows(p.w3), to_std(x), to_std(v));
            REQUIRE(u.size() == 5);
            for (int i = 0; i < 5; ++i) CHECK(std::abs(u(i) - ref[i]) <= 1e-12);
            const auto full = adaptive_fuse_full(p, x, v);
            for (int i = 0; i < full.gate.size(); ++i) {
                CHECK(full.gate(i) > 0.0);
                CHECK(full.gate(i) < 1.0);
            }
        }
    }
}

TEST_CASE("fusion shape errors") {
    auto p = FusionParams::zeros(4, 3, 2);
    CHECK_THROWS_AS(adaptive_fuse(p, Vector::Zero(2), Vector::Zero(2)), ShapeError);
    CHECK_THROWS_AS(adaptive_fuse(p, Vector::Zero(3), Vector::Zero(3)), ShapeError);
    p.w1 = Matrix::Zero(3, 4);
    CHECK_THROWS_AS(adaptive_fuse(p, Vector::Zero(3), Vector::Zero(2)), ShapeError);
}

TEST_CASE("loss values") {
    std::mt19937_64 rng(23);
    SUBCASE("saturated perfect masks") {
        LossInputs in = random_loss_inputs(rng, 5, 3, 2);
        for (int q = 0; q < 2; ++q)
            for (int n = 0; n < 5; ++n) in.mask_logits(q, n) = in.mask_targets(q, n) > 0.5 ? 30.0 : -30.0;
        // every query needs a positive entry for dice to vanish
        in.mask_targets(0, 0) = in.mask_targets(1, 0) = 1;
        in.mask_logits(0, 0) = in.mask_logits(1, 0) = 30.0;
        const auto l = loss_total({}, in);
        CHECK(l.dice <= 1e-9);
        CHECK(l.bce <= 1e-9);
    }
    SUBCASE("class term only") {
        const LossInputs in = random_loss_inputs(rng, 5, 3, 2);
        const auto l = loss_total({1, 0, 0}, in);
        CHECK(l.total == l.cls);
    }
    SUBCASE("matches a straight-line evaluation") {
        for (int trial = 0; trial < 20; ++trial) {
            const LossInputs in = random_loss_inputs(rng, 5, 4, 2);
            const LossWeights w{0.7, 1.3, 2.1};
            const auto l = loss_total(w, in);
            const auto ref = oracle::loss(w.cls, w.bce, w.dice, to_rows(in.class_logits), in.class_targets,
                                          to_rows(in.mask_logits), to_rows(in.mask_targets));
            CHECK(std::abs(l.cls - ref.cls) <= 1e-10);
            CHECK(std::abs(l.bce - ref.bce) <= 1e-10);
            CHECK(std::abs(l.dice - ref.dice) <= 1e-10);
            CHECK(std::abs(l.total - ref.total) <= 1e-10);
        }
    }
    SUBCASE("bad inputs") {
        LossInputs in = random_loss_inputs(rng, 5, 3, 2);
        CHECK_THROWS_AS(loss_total({0, 0, 0}, in), std::invalid_argument);
        CHECK_THROWS_AS(loss_total({-1, 1, 1}, in), std::invalid_argument);
        in.class_targets[0] = 7;
        CHECK_THROWS_AS(loss_total({}, in), ShapeError);
        in = random_loss_inputs(rng, 5, 3, 2);
        in.mask_logits = Matrix::Zero(2, 4);
        CHECK_THROWS_AS(loss_total({}, in), ShapeError);
    }
}

TEST_CASE("gradient checks") {
    SUBCASE("linear map") {
        Vector a(4);
        a << 1.5, -2, 0.25, 3;
        const auto f = [&](const Vector& x) { return a.dot(x); };
        CHECK(grad_check(f, Vector::Ones(4), a) <= 1e-10);
    }
    SUBCASE("a wrong gradient is caught") {
        const auto f = [](const Vector& x) { return x.squaredNorm(); };
        Vector x(2);
        x << 1, 2;
        CHECK(grad_check(f, x, 2 * x) <= 1e-8);
        CHECK(grad_check(f, x, 3 * x) >= 0.1);
    }
    std::mt19937_64 rng(29);
    SUBCASE("fusion") {
        for (int trial = 0; trial < 20; ++trial) {
            for (GateMode mode : {GateMode::Scalar, GateMode::PerChannel}) {
                FusionParams p;
                p.mode = mode;
                p.w1 = random_matrix(rng, mode == GateMode::Scalar ? 1 : 2, 4, 0.5);
                p.w2 = random_matrix(rng, 4, 3, 0.5);
                p.w3 = random_matrix(rng, 4, 2, 0.5);
                CHECK(grad_check_fuse(p, random_vector(rng, 3), random_vector(rng, 2), random_vector(rng, 5)) <= 1e-4);
            }
        }
    }
    SUBCASE("loss") {
        for (int trial = 0; trial < 20; ++trial) {
            CHECK(grad_check_loss({1.0, 0.5, 2.0}, random_loss_inputs(rng, 6, 4, 3)) <= 1e-4);
        }
    }
}

TEST_CASE("array files") {
    std::mt19937_64 rng(31);
    const Matrix m = random_matrix(rng, 3, 4);
    const std::string text = dump_array(m);
    CHECK(text.rfind("plancad-array/1 float64 3 4\n", 0) == 0);
    CHECK(load_array(text) == m);
    CHECK(load_array(dump_array(Matrix(0, 3))).cols() == 3);
    CHECK_THROWS(load_array("plancad-array/1 float64 2 2\n1 2\n3\n"));
    CHECK_THROWS(load_array("garbage"));
}

TEST_CASE("features from a rendered chunk") {
    chunker::Chunk c;
    c.catalog = screening::default_reference_table().catalog;
    c.primitives.push_back({Primitive::line({0, 7.01}, {14, 7.01}, "h"), {}, std::nullopt});
    const auto grid = FeatureGrid::from_image(chunker::render_chunk(c, 70, 70), 14.0);
    const auto tokens = tokenize_primitives(c);
    CHECK(tokens[0].center.y == 7.01);
    // row 35 of 70 holds the line; (7.1, 7.1) is the center of pixel (35, 35)
    const Matrix s = sample_features(grid, {{7.1, 7.1}, {7.0, 3.0}});
    CHECK(s(0, 0) == 1.0);
    CHECK(s(1, 0) == 0.0);
}
