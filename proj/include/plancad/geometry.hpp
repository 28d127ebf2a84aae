#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace plancad::geometry {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Absolute tolerance for coordinate comparisons, in drawing units.
inline constexpr double kTolerance = 1e-9;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }

// Maps an angle in radians into [0, 2pi).
double normalize_angle(double radians);

struct Rect {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    bool contains(Vec2 p, double tol = 0.0) const {
        return p.x >= min_x - tol && p.x <= max_x + tol && p.y >= min_y - tol &&
               p.y <= max_y + tol;
    }
    Rect expanded(double margin) const {
        return {min_x - margin, min_y - margin, max_x + margin, max_y + margin};
    }
    // Smallest rect containing both.
    Rect united(const Rect& other) const;

    friend bool operator==(const Rect&, const Rect&) = default;
};

enum class PrimitiveKind { Line, Arc, Circle, PolySeg };

const char* to_string(PrimitiveKind kind);

// One geometric element. Line and PolySeg use p0/p1; Arc and Circle use
// center/radius; Arc also uses the CCW angle range [start_angle, end_angle].
// Construct through the factories, which enforce the invariants.
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Line;
    Vec2 p0;
    Vec2 p1;
    Vec2 center;
    double radius = 0.0;
    double start_angle = 0.0;
    double end_angle = 0.0;
    std::string source_id;

    static Primitive line(Vec2 p0, Vec2 p1, std::string source_id);
    static Primitive poly_seg(Vec2 p0, Vec2 p1, std::string source_id);
    static Primitive arc(Vec2 center, double radius, double start_angle, double end_angle,
                         std::string source_id);
    static Primitive circle(Vec2 center, double radius, std::string source_id);

    bool is_curve() const { return kind == PrimitiveKind::Arc || kind == PrimitiveKind::Circle; }
    // CCW angular extent of an arc, in (0, 2pi).
    double sweep() const;
    Vec2 point_at_angle(double radians) const;
    Vec2 start_point() const;
    Vec2 end_point() const;

    friend bool operator==(const Primitive&, const Primitive&) = default;
};

// Geometry equality within tol (ids ignored).
bool approx_equal(const Primitive& a, const Primitive& b, double tol = kTolerance);

// 2x3 affine map: x' = a*x + b*y + tx, y' = c*x + d*y + ty.
struct Affine {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
    double d = 1.0;
    double tx = 0.0;
    double ty = 0.0;

    static Affine identity() { return {}; }
    static Affine translation(double dx, double dy) { return {1, 0, 0, 1, dx, dy}; }
    static Affine rotation(double radians);
    static Affine scaling(double sx, double sy) { return {sx, 0, 0, sy, 0, 0}; }
    static Affine scaling(double s) { return scaling(s, s); }

    double determinant() const { return a * d - b * c; }
    Vec2 apply(Vec2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
    // True when the linear part is a similarity (rotation or reflection times
    // a uniform scale).
    bool is_conformal(double tol = 1e-12) const;
    double uniform_scale() const { return std::sqrt(std::abs(determinant())); }

    // (lhs * rhs)(p) == lhs(rhs(p)).
    friend Affine operator*(const Affine& lhs, const Affine& rhs);
    friend bool operator==(const Affine&, const Affine&) = default;
};

double primitive_length(const Primitive& p);
Rect primitive_aabb(const Primitive& p);

// Maps p through t. The result carries derived_id as its source id. Throws
// GeometryError for a singular t and NonConformalOnCurve when t would turn an
// arc or circle into an ellipse.
Primitive apply_transform(const Primitive& p, const Affine& t, std::string derived_id);
inline Primitive apply_transform(const Primitive& p, const Affine& t) {
    return apply_transform(p, t, p.source_id + "'");
}

// n >= 2 points equally spaced in arc length. Open curves include both
// endpoints; circles start at angle 0 and omit the closing duplicate.
std::vector<Vec2> sample_points(const Primitive& p, int n);

// True when any point of p lies in the closed rect r expanded by tol.
bool intersects(const Primitive& p, const Rect& r, double tol = kTolerance);

}  // namespace plancad::geometry
