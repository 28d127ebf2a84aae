#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plancad/chunker.hpp"

namespace plancad::modelprep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using geometry::Primitive;
using geometry::Vec2;

// Primitive encoded as a point with geometric attributes.
struct PointToken {
    Vec2 center;
    std::array<double, 4> type_one_hot{};  // Line, Arc, Circle, PolySeg
    double length = 0.0;
    double orientation = 0.0;  // chord direction in [0, pi); 0 for circles

    static constexpr int kDim = 8;
    // (cx, cy, one-hot x4, length, orientation)
    Vector features() const;
};

PointToken tokenize(const Primitive& p);
std::vector<PointToken> tokenize_primitives(const chunker::Chunk& chunk);
// One row per token, kDim columns.
Matrix token_matrix(const std::vector<PointToken>& tokens);

// H x W x C grid laid out like ImageGrid: row 0 is the y = 0 edge, pixel
// (col, row) covers [col*s/W, (col+1)*s/W) x [row*s/H, (row+1)*s/H).
struct FeatureGrid {
    int height = 0;
    int width = 0;
    int channels = 0;
    double size_m = chunker::kDefaultChunkSizeM;
    std::vector<double> values;

    FeatureGrid() = default;
    FeatureGrid(int height, int width, int channels, double size_m);
    static FeatureGrid from_image(const chunker::ImageGrid& image, double size_m);

    double& at(int row, int col, int channel) {
        return values[(static_cast<std::size_t>(row) * width + col) * channels + channel];
    }
    double at(int row, int col, int channel) const {
        return values[(static_cast<std::size_t>(row) * width + col) * channels + channel];
    }
};

// Bilinear interpolation between the four surrounding pixel centers.
// Queries outside the grid clamp to the border centers; queries within 1e-9
// pixel of a center snap onto it so centers reproduce stored values exactly.
// Returns one row per point, C columns.
Matrix sample_features(const FeatureGrid& grid, const std::vector<Vec2>& points);

enum class GateMode {
    Scalar,      // W1 is 1 x h, one gate per primitive
    PerChannel,  // W1 is d_v x h, one gate per image channel
};

struct FusionParams {
    Matrix w1;  // 1 x h, or d_v x h per channel
    Matrix w2;  // h x d_x
    Matrix w3;  // h x d_v
    GateMode mode = GateMode::Scalar;

    int hidden() const { return static_cast<int>(w2.rows()); }
    int dx() const { return static_cast<int>(w2.cols()); }
    int dv() const { return static_cast<int>(w3.cols()); }

    static FusionParams zeros(int h, int dx, int dv, GateMode mode = GateMode::Scalar);
};

struct FusionResult {
    Vector u;     // concat(X, w * V)
    Vector gate;  // w: 1 entry, or d_v entries per channel
};

// w = sigmoid(W1 tanh(W2 X + W3 V)), U = concat(X, w V). Throws ShapeError.
FusionResult adaptive_fuse_full(const FusionParams& params, const Vector& x, const Vector& v);
Vector adaptive_fuse(const FusionParams& params, const Vector& x, const Vector& v);

struct FusionGrads {
    Matrix w1, w2, w3;
    Vector x, v;
};

// Gradients of <upstream, U> with respect to every input.
FusionGrads adaptive_fuse_backward(const FusionParams& params, const Vector& x, const Vector& v,
                                   const Vector& upstream);

struct LossWeights {
    double cls = 1.0;
    double bce = 1.0;
    double dice = 1.0;
};

inline constexpr double kDiceEpsilon = 1.0;

struct LossInputs {
    Matrix class_logits;             // N x K
    std::vector<int> class_targets;  // N indices into [0, K)
    Matrix mask_logits;              // Q x N
    Matrix mask_targets;             // Q x N, entries 0 or 1
};

struct LossValue {
    double total = 0.0;
    double cls = 0.0;
    double bce = 0.0;
    double dice = 0.0;
};

struct LossGrads {
    Matrix class_logits;
    Matrix mask_logits;
};

// L = cls*CE + bce*BCE + dice*soft dice. CE is averaged over primitives, BCE
// over all Q*N mask entries, dice over queries. Throws ShapeError, and
// std::invalid_argument for negative or all-zero weights.
LossValue loss_total(const LossWeights& weights, const LossInputs& in);
LossGrads loss_backward(const LossWeights& weights, const LossInputs& in);

// max_k |ga - gn| / max(1e-8, |ga| + |gn|) with central differences of f at x.
double grad_check(const std::function<double(const Vector&)>& f, const Vector& x,
                  const Vector& analytic, double eps = 1e-5);

// Checks every input of adaptive_fuse through the scalar <upstream, U>.
double grad_check_fuse(const FusionParams& params, const Vector& x, const Vector& v,
                       const Vector& upstream, double eps = 1e-5);
// Checks class and mask logits of loss_total.
double grad_check_loss(const LossWeights& weights, const LossInputs& in, double eps = 1e-5);

// "plancad-array/1 float64 <rows> <cols>\n" then one text row per matrix row.
std::string dump_array(const Matrix& m);
Matrix load_array(const std::string& text);

}  // namespace plancad::modelprep
