#include "plancad/modelprep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "plancad/errors.hpp"

namespace plancad::modelprep {

namespace {

using geometry::PrimitiveKind;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_fusion_shapes(const FusionParams& p, const Vector& x, const Vector& v) {
    const auto h = p.w2.rows();
    if (p.w3.rows() != h) throw ShapeError("W3 is " + shape(p.w3) + ", expected " + std::to_string(h) + " rows");
    if (p.w1.cols() != h) throw ShapeError("W1 is " + shape(p.w1) + ", expected " + std::to_string(h) + " columns");
    const auto gates = p.mode == GateMode::Scalar ? 1 : p.w3.cols();
    if (p.w1.rows() != gates) {
        throw ShapeError("W1 is " + shape(p.w1) + ", expected " + std::to_string(gates) + " rows");
    }
    if (x.size() != p.w2.cols()) {
        throw ShapeError("X has " + std::to_string(x.size()) + " entries, W2 expects " + std::to_string(p.w2.cols()));
    }
    if (v.size() != p.w3.cols()) {
        throw ShapeError("V has " + std::to_string(v.size()) + " entries, W3 expects " + std::to_string(p.w3.cols()));
    }
}

void check_loss_shapes(const LossWeights& w, const LossInputs& in) {
    if (w.cls < 0.0 || w.bce < 0.0 || w.dice < 0.0) throw std::invalid_argument("loss weights must be nonnegative");
    if (w.cls == 0.0 && w.bce == 0.0 && w.dice == 0.0) throw std::invalid_argument("loss weights are all zero");
    const auto n = in.class_logits.rows();
    if (static_cast<std::size_t>(n) != in.class_targets.size()) {
        throw ShapeError("class logits have " + std::to_string(n) + " rows but " +
                         std::to_string(in.class_targets.size()) + " targets");
    }
    for (int t : in.class_targets) {
        if (t < 0 || t >= in.class_logits.cols()) throw ShapeError("class target " + std::to_string(t) + " out of range");
    }
    if (in.mask_logits.rows() != in.mask_targets.rows() || in.mask_logits.cols() != in.mask_targets.cols()) {
        throw ShapeError("mask logits " + shape(in.mask_logits) + " vs targets " + shape(in.mask_targets));
    }
    if (in.mask_logits.size() > 0 && in.mask_logits.cols() != n) {
        throw ShapeError("mask logits cover " + std::to_string(in.mask_logits.cols()) + " primitives, expected " +
                         std::to_string(n));
    }
}

// Snaps a continuous pixel coordinate onto the grid of centers and splits it
// into (lower index, upper index, fraction).
void axis(double pixel, int count, int& i0, int& i1, double& frac) {
    pixel = std::clamp(pixel, 0.0, static_cast<double>(count - 1));
    const double nearest = std::round(pixel);
    if (std::abs(pixel - nearest) < 1e-9) pixel = nearest;
    i0 = static_cast<int>(std::floor(pixel));
    i1 = std::min(i0 + 1, count - 1);
    frac = pixel - i0;
}

}  // namespace

Vector PointToken::features() const {
    Vector f(kDim);
    f << center.x, center.y, type_one_hot[0], type_one_hot[1], type_one_hot[2], type_one_hot[3], length, orientation;
    return f;
}

PointToken tokenize(const Primitive& p) {
    PointToken t;
    t.length = geometry::primitive_length(p);
    t.type_one_hot[static_cast<std::size_t>(p.kind)] = 1.0;
    switch (p.kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg:
            t.center = 0.5 * (p.p0 + p.p1);
            break;
        case PrimitiveKind::Arc:
            t.center = p.point_at_angle(p.start_angle + p.sweep() / 2.0);
            break;
        case PrimitiveKind::Circle:
            t.center = p.center;
            return t;
    }
    const Vec2 chord = p.end_point() - p.start_point();
    double angle = std::atan2(chord.y, chord.x);
    angle = std::fmod(angle, std::numbers::pi);
    if (angle < 0.0) angle += std::numbers::pi;
    if (angle >= std::numbers::pi) angle = 0.0;
    t.orientation = angle;
    return t;
}

std::vector<PointToken> tokenize_primitives(const chunker::Chunk& chunk) {
    std::vector<PointToken> out;
    out.reserve(chunk.primitives.size());
    for (const auto& cp : chunk.primitives) out.push_back(tokenize(cp.primitive));
    return out;
}

Matrix token_matrix(const std::vector<PointToken>& tokens) {
    Matrix m(static_cast<Eigen::Index>(tokens.size()), PointToken::kDim);
    for (std::size_t i = 0; i < tokens.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = tokens[i].features();
    return m;
}

FeatureGrid::FeatureGrid(int h, int w, int c, double s) : height(h), width(w), channels(c), size_m(s) {
    if (h <= 0 || w <= 0 || c <= 0) throw ShapeError("feature grid dimensions must be positive");
    if (!(s > 0.0)) throw ShapeError("feature grid size must be positive");
    values.assign(static_cast<std::size_t>(h) * w * c, 0.0);
}

FeatureGrid FeatureGrid::from_image(const chunker::ImageGrid& image, double size_m) {
    FeatureGrid g(image.height, image.width, image.channels, size_m);
    std::copy(image.values.begin(), image.values.end(), g.values.begin());
    return g;
}

Matrix sample_features(const FeatureGrid& grid, const std::vector<Vec2>& points) {
    if (grid.values.size() != static_cast<std::size_t>(grid.height) * grid.width * grid.channels ||
        grid.values.empty()) {
        throw ShapeError("feature grid value count does not match its dimensions");
    }
    Matrix out(static_cast<Eigen::Index>(points.size()), grid.channels);
    for (std::size_t k = 0; k < points.size(); ++k) {
        const Vec2 q = points[k];
        if (!std::isfinite(q.x) || !std::isfinite(q.y)) throw std::invalid_argument("non-finite sample point");
        int c0, c1, r0, r1;
        double fx, fy;
        axis(q.x * grid.width / grid.size_m - 0.5, grid.width, c0, c1, fx);
        axis(q.y * grid.height / grid.size_m - 0.5, grid.height, r0, r1, fy);
        for (int ch = 0; ch < grid.channels; ++ch) {
            const double top = (1.0 - fx) * grid.at(r0, c0, ch) + (fx == 0.0 ? 0.0 : fx * grid.at(r0, c1, ch));
            const double bottom = (1.0 - fx) * grid.at(r1, c0, ch) + (fx == 0.0 ? 0.0 : fx * grid.at(r1, c1, ch));
            out(static_cast<Eigen::Index>(k), ch) = (1.0 - fy) * top + (fy == 0.0 ? 0.0 : fy * bottom);
        }
    }
    return out;
}

FusionParams FusionParams::zeros(int h, int dx, int dv, GateMode mode) {
    FusionParams p;
    p.mode = mode;
    p.w1 = Matrix::Zero(mode == GateMode::Scalar ? 1 : dv, h);
    p.w2 = Matrix::Zero(h, dx);
    p.w3 = Matrix::Zero(h, dv);
    return p;
}

FusionResult adaptive_fuse_full(const FusionParams& params, const Vector& x, const Vector& v) {
    check_fusion_shapes(params, x, v);
    const Vector hidden = (params.w2 * x + params.w3 * v).array().tanh().matrix();
    const Vector s = params.w1 * hidden;
    FusionResult r;
    r.gate = s.unaryExpr([](double z) { return sigmoid(z); });
    r.u.resize(x.size() + v.size());
    r.u.head(x.size()) = x;
    if (params.mode == GateMode::Scalar) {
        r.u.tail(v.size()) = r.gate(0) * v;
    } else {
        r.u.tail(v.size()) = r.gate.cwiseProduct(v);
    }
    return r;
}

Vector adaptive_fuse(const FusionParams& params, const Vector& x, const Vector& v) {
    return adaptive_fuse_full(params, x, v).u;
}

FusionGrads adaptive_fuse_backward(const FusionParams& params, const Vector& x, const Vector& v,
                                   const Vector& upstream) {
    check_fusion_shapes(params, x, v);
    if (upstream.size() != x.size() + v.size()) throw ShapeError("upstream gradient has the wrong length");
    const Vector hidden = (params.w2 * x + params.w3 * v).array().tanh().matrix();
    const Vector gate = (params.w1 * hidden).unaryExpr([](double z) { return sigmoid(z); });
    const Vector g_x = upstream.head(x.size());
    const Vector g_wv = upstream.tail(v.size());

    FusionGrads g;
    Vector ds;
    if (params.mode == GateMode::Scalar) {
        const double w = gate(0);
        g.v = w * g_wv;
        ds = Vector::Constant(1, g_wv.dot(v) * w * (1.0 - w));
    } else {
        g.v = gate.cwiseProduct(g_wv);
        ds = g_wv.cwiseProduct(v).cwiseProduct(gate.cwiseProduct((Vector::Ones(gate.size()) - gate)));
    }
    g.w1 = ds * hidden.transpose();
    const Vector da = (params.w1.transpose() * ds).cwiseProduct((1.0 - hidden.array().square()).matrix());
    g.w2 = da * x.transpose();
    g.w3 = da * v.transpose();
    g.x = g_x + params.w2.transpose() * da;
    g.v += params.w3.transpose() * da;
    return g;
}

LossValue loss_total(const LossWeights& weights, const LossInputs& in) {
    check_loss_shapes(weights, in);
    LossValue out;
    const auto n = in.class_logits.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = in.class_logits.row(i);
        const double m = row.maxCoeff();
        const double lse = m + std::log((row.array() - m).exp().sum());
        out.cls += lse - row(in.class_targets[static_cast<std::size_t>(i)]);
    }
    if (n > 0) out.cls /= static_cast<double>(n);

    const auto q = in.mask_logits.rows();
    const auto cols = in.mask_logits.cols();
    for (Eigen::Index a = 0; a < q; ++a) {
        double inter = 0.0, psum = 0.0, gsum = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double x = in.mask_logits(a, j);
            const double y = in.mask_targets(a, j);
            out.bce += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
            const double p = sigmoid(x);
            inter += p * y;
            psum += p;
            gsum += y;
        }
        out.dice += 1.0 - (2.0 * inter + kDiceEpsilon) / (psum + gsum + kDiceEpsilon);
    }
    if (q * cols > 0) out.bce /= static_cast<double>(q * cols);
    if (q > 0) out.dice /= static_cast<double>(q);
    out.total = weights.cls * out.cls + weights.bce * out.bce + weights.dice * out.dice;
    return out;
}

LossGrads loss_backward(const LossWeights& weights, const LossInputs& in) {
    check_loss_shapes(weights, in);
    LossGrads g;
    const auto n = in.class_logits.rows();
    g.class_logits = Matrix::Zero(n, in.class_logits.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = in.class_logits.row(i);
        const Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp().matrix();
        g.class_logits.row(i) = e / e.sum();
        g.class_logits(i, in.class_targets[static_cast<std::size_t>(i)]) -= 1.0;
    }
    if (n > 0) g.class_logits *= weights.cls / static_cast<double>(n);

    const auto q = in.mask_logits.rows();
    const auto cols = in.mask_logits.cols();
    g.mask_logits = Matrix::Zero(q, cols);
    for (Eigen::Index a = 0; a < q; ++a) {
        double inter = 0.0, psum = 0.0, gsum = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double p = sigmoid(in.mask_logits(a, j));
            inter += p * in.mask_targets(a, j);
            psum += p;
            gsum += in.mask_targets(a, j);
        }
        const double num = 2.0 * inter + kDiceEpsilon;
        const double den = psum + gsum + kDiceEpsilon;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double p = sigmoid(in.mask_logits(a, j));
            const double y = in.mask_targets(a, j);
            const double d_bce = (p - y) / static_cast<double>(q * cols);
            const double d_dice_dp = -(2.0 * y * den - num) / (den * den) / static_cast<double>(q);
            g.mask_logits(a, j) = weights.bce * d_bce + weights.dice * d_dice_dp * p * (1.0 - p);
        }
    }
    return g;
}

double grad_check(const std::function<double(const Vector&)>& f, const Vector& x, const Vector& analytic,
                  double eps) {
    if (analytic.size() != x.size()) throw ShapeError("analytic gradient has the wrong length");
    double worst = 0.0;
    Vector probe = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        probe(k) = x(k) + eps;
        const double up = f(probe);
        probe(k) = x(k) - eps;
        const double down = f(probe);
        probe(k) = x(k);
        const double numeric = (up - down) / (2.0 * eps);
        const double ga = analytic(k);
        worst = std::max(worst, std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric)));
    }
    return worst;
}

namespace {

// Packs (W1, W2, W3, X, V) into one vector in that order, column-major.
Vector pack(const FusionParams& p, const Vector& x, const Vector& v) {
    Vector out(p.w1.size() + p.w2.size() + p.w3.size() + x.size() + v.size());
    Eigen::Index at = 0;
    for (const Matrix* m : {&p.w1, &p.w2, &p.w3}) {
        out.segment(at, m->size()) = Eigen::Map<const Vector>(m->data(), m->size());
        at += m->size();
    }
    out.segment(at, x.size()) = x;
    out.segment(at + x.size(), v.size()) = v;
    return out;
}

void unpack(const Vector& flat, FusionParams& p, Vector& x, Vector& v) {
    Eigen::Index at = 0;
    for (Matrix* m : {&p.w1, &p.w2, &p.w3}) {
        Eigen::Map<Vector>(m->data(), m->size()) = flat.segment(at, m->size());
        at += m->size();
    }
    x = flat.segment(at, x.size());
    v = flat.segment(at + x.size(), v.size());
}

}  // namespace

double grad_check_fuse(const FusionParams& params, const Vector& x, const Vector& v, const Vector& upstream,
                       double eps) {
    const FusionGrads g = adaptive_fuse_backward(params, x, v, upstream);
    FusionParams grads_as_params = params;
    grads_as_params.w1 = g.w1;
    grads_as_params.w2 = g.w2;
    grads_as_params.w3 = g.w3;
    const Vector analytic = pack(grads_as_params, g.x, g.v);
    auto f = [&](const Vector& flat) {
        FusionParams p = params;
        Vector px = x;
        Vector pv = v;
        unpack(flat, p, px, pv);
        return upstream.dot(adaptive_fuse(p, px, pv));
    };
    return grad_check(f, pack(params, x, v), analytic, eps);
}

double grad_check_loss(const LossWeights& weights, const LossInputs& in, double eps) {
    const LossGrads g = loss_backward(weights, in);
    const auto nc = in.class_logits.size();
    const auto nm = in.mask_logits.size();
    Vector flat(nc + nm), analytic(nc + nm);
    flat.head(nc) = Eigen::Map<const Vector>(in.class_logits.data(), nc);
    flat.tail(nm) = Eigen::Map<const Vector>(in.mask_logits.data(), nm);
    analytic.head(nc) = Eigen::Map<const Vector>(g.class_logits.data(), nc);
    analytic.tail(nm) = Eigen::Map<const Vector>(g.mask_logits.data(), nm);
    auto f = [&](const Vector& z) {
        LossInputs probe = in;
        Eigen::Map<Vector>(probe.class_logits.data(), nc) = z.head(nc);
        Eigen::Map<Vector>(probe.mask_logits.data(), nm) = z.tail(nm);
        return loss_total(weights, probe).total;
    };
    return grad_check(f, flat, analytic, eps);
}

std::string dump_array(const Matrix& m) {
    std::string out = "plancad-array/1 float64 " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    char buf[32];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
            out += buf;
            out += c + 1 < m.cols() ? ' ' : '\n';
        }
    }
    return out;
}

Matrix load_array(const std::string& text) {
    std::istringstream in(text);
    std::string magic, dtype;
    Eigen::Index rows = -1, cols = -1;
    in >> magic >> dtype >> rows >> cols;
    if (magic != "plancad-array/1" || dtype != "float64" || rows < 0 || cols < 0) {
        throw ShapeError("bad array header");
    }
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!(in >> m(r, c))) throw ShapeError("array body shorter than its header");
        }
    }
    return m;
}

}  // namespace plancad::modelprep
