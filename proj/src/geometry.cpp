#include "plancad/geometry.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "plancad/errors.hpp"

namespace plancad::geometry {

namespace {

bool finite(Vec2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

// Offset of angle a from start along the CCW direction, in [0, 2pi).
double ccw_offset(double start, double a) { return normalize_angle(a - start); }

bool angle_in_arc(const Primitive& arc, double a) {
    return ccw_offset(arc.start_angle, a) <= arc.sweep() + 1e-15;
}

bool segment_intersects_rect(Vec2 p0, Vec2 p1, const Rect& r) {
    // Liang-Barsky clipping against the closed rect.
    double t0 = 0.0;
    double t1 = 1.0;
    const double dx = p1.x - p0.x;
    const double dy = p1.y - p0.y;
    const std::array<std::pair<double, double>, 4> edges = {{
        {-dx, p0.x - r.min_x},
        {dx, r.max_x - p0.x},
        {-dy, p0.y - r.min_y},
        {dy, r.max_y - p0.y},
    }};
    for (auto [pe, q] : edges) {
        if (pe == 0.0) {
            if (q < 0.0) return false;
            continue;
        }
        const double t = q / pe;
        if (pe < 0.0) {
            if (t > t1) return false;
            t0 = std::max(t0, t);
        } else {
            if (t < t0) return false;
            t1 = std::min(t1, t);
        }
    }
    return t0 <= t1;
}

// Angles at which the circle (center, radius) meets the segment a-b.
void circle_segment_angles(Vec2 center, double radius, Vec2 a, Vec2 b, std::vector<double>& out) {
    const Vec2 d = b - a;
    const Vec2 f = a - center;
    const double qa = d.x * d.x + d.y * d.y;
    const double qb = 2.0 * (f.x * d.x + f.y * d.y);
    const double qc = f.x * f.x + f.y * f.y - radius * radius;
    if (qa == 0.0) return;
    double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) {
        if (disc > -1e-12 * qb * qb) {
            disc = 0.0;
        } else {
            return;
        }
    }
    const double root = std::sqrt(disc);
    for (double t : {(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)}) {
        if (t < -1e-12 || t > 1.0 + 1e-12) continue;
        const Vec2 p = a + t * d;
        out.push_back(normalize_angle(std::atan2(p.y - center.y, p.x - center.x)));
    }
}

}  // namespace

double normalize_angle(double radians) {
    double a = std::fmod(radians, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;
    return a;
}

Rect Rect::united(const Rect& other) const {
    return {std::min(min_x, other.min_x), std::min(min_y, other.min_y),
            std::max(max_x, other.max_x), std::max(max_y, other.max_y)};
}

const char* to_string(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::Line: return "line";
        case PrimitiveKind::Arc: return "arc";
        case PrimitiveKind::Circle: return "circle";
        case PrimitiveKind::PolySeg: return "polyseg";
    }
    return "?";
}

Primitive Primitive::line(Vec2 p0, Vec2 p1, std::string source_id) {
    if (!finite(p0) || !finite(p1)) throw GeometryError("line with non-finite coordinates");
    if (distance(p0, p1) <= kTolerance) {
        throw GeometryError("degenerate line '" + source_id + "': endpoints coincide");
    }
    Primitive p;
    p.kind = PrimitiveKind::Line;
    p.p0 = p0;
    p.p1 = p1;
    p.source_id = std::move(source_id);
    return p;
}

Primitive Primitive::poly_seg(Vec2 p0, Vec2 p1, std::string source_id) {
    Primitive p = line(p0, p1, std::move(source_id));
    p.kind = PrimitiveKind::PolySeg;
    return p;
}

Primitive Primitive::arc(Vec2 center, double radius, double start_angle, double end_angle,
                         std::string source_id) {
    if (!finite(center) || !std::isfinite(start_angle) || !std::isfinite(end_angle)) {
        throw GeometryError("arc with non-finite parameters");
    }
    if (!(radius > 0.0)) throw GeometryError("arc '" + source_id + "' with non-positive radius");
    Primitive p;
    p.kind = PrimitiveKind::Arc;
    p.center = center;
    p.radius = radius;
    p.start_angle = normalize_angle(start_angle);
    p.end_angle = normalize_angle(end_angle);
    if (p.sweep() * radius <= kTolerance) {
        throw GeometryError("arc '" + source_id + "' with zero sweep; use a circle");
    }
    p.source_id = std::move(source_id);
    return p;
}

Primitive Primitive::circle(Vec2 center, double radius, std::string source_id) {
    if (!finite(center)) throw GeometryError("circle with non-finite center");
    if (!(radius > 0.0)) {
        throw GeometryError("circle '" + source_id + "' with non-positive radius");
    }
    Primitive p;
    p.kind = PrimitiveKind::Circle;
    p.center = center;
    p.radius = radius;
    p.source_id = std::move(source_id);
    return p;
}

double Primitive::sweep() const {
    if (kind == PrimitiveKind::Circle) return kTwoPi;
    return normalize_angle(end_angle - start_angle);
}

Vec2 Primitive::point_at_angle(double radians) const {
    return {center.x + radius * std::cos(radians), center.y + radius * std::sin(radians)};
}

Vec2 Primitive::start_point() const {
    switch (kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg: return p0;
        case PrimitiveKind::Arc: return point_at_angle(start_angle);
        case PrimitiveKind::Circle: return point_at_angle(0.0);
    }
    return p0;
}

Vec2 Primitive::end_point() const {
    switch (kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg: return p1;
        case PrimitiveKind::Arc: return point_at_angle(end_angle);
        case PrimitiveKind::Circle: return point_at_angle(0.0);
    }
    return p1;
}

bool approx_equal(const Primitive& a, const Primitive& b, double tol) {
    if (a.kind != b.kind) return false;
    auto close = [tol](double u, double v) { return std::abs(u - v) <= tol; };
    auto close_pt = [&](Vec2 u, Vec2 v) { return close(u.x, v.x) && close(u.y, v.y); };
    auto close_angle = [tol](double u, double v) {
        const double diff = normalize_angle(u - v);
        return diff <= tol || kTwoPi - diff <= tol;
    };
    switch (a.kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg: return close_pt(a.p0, b.p0) && close_pt(a.p1, b.p1);
        case PrimitiveKind::Circle: return close_pt(a.center, b.center) && close(a.radius, b.radius);
        case PrimitiveKind::Arc:
            return close_pt(a.center, b.center) && close(a.radius, b.radius) &&
                   close_angle(a.start_angle, b.start_angle) && close_angle(a.end_angle, b.end_angle);
    }
    return false;
}

Affine Affine::rotation(double radians) {
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    return {c, -s, s, c, 0.0, 0.0};
}

bool Affine::is_conformal(double tol) const {
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
    const double t = tol * std::max(scale, 1.0);
    const bool rotation_like = std::abs(a - d) <= t && std::abs(b + c) <= t;
    const bool reflection_like = std::abs(a + d) <= t && std::abs(b - c) <= t;
    return rotation_like || reflection_like;
}

Affine operator*(const Affine& l, const Affine& r) {
    return {l.a * r.a + l.b * r.c,
            l.a * r.b + l.b * r.d,
            l.c * r.a + l.d * r.c,
            l.c * r.b + l.d * r.d,
            l.a * r.tx + l.b * r.ty + l.tx,
            l.c * r.tx + l.d * r.ty + l.ty};
}

double primitive_length(const Primitive& p) {
    switch (p.kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg: return distance(p.p0, p.p1);
        case PrimitiveKind::Arc: return p.radius * p.sweep();
        case PrimitiveKind::Circle: return kTwoPi * p.radius;
    }
    return 0.0;
}

Rect primitive_aabb(const Primitive& p) {
    switch (p.kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg:
            return {std::min(p.p0.x, p.p1.x), std::min(p.p0.y, p.p1.y), std::max(p.p0.x, p.p1.x),
                    std::max(p.p0.y, p.p1.y)};
        case PrimitiveKind::Circle:
            return {p.center.x - p.radius, p.center.y - p.radius, p.center.x + p.radius,
                    p.center.y + p.radius};
        case PrimitiveKind::Arc: {
            const Vec2 s = p.start_point();
            const Vec2 e = p.end_point();
            Rect box{std::min(s.x, e.x), std::min(s.y, e.y), std::max(s.x, e.x), std::max(s.y, e.y)};
            const double sweep = p.sweep();
            for (int k = 0; k < 4; ++k) {
                const double a = k * std::numbers::pi / 2.0;
                if (ccw_offset(p.start_angle, a) > sweep) continue;
                // Cardinal extremum: one coordinate is exact.
                switch (k) {
                    case 0: box.max_x = p.center.x + p.radius; break;
                    case 1: box.max_y = p.center.y + p.radius; break;
                    case 2: box.min_x = p.center.x - p.radius; break;
                    case 3: box.min_y = p.center.y - p.radius; break;
                }
            }
            return box;
        }
    }
    return {};
}

Primitive apply_transform(const Primitive& p, const Affine& t, std::string derived_id) {
    const double det = t.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) {
        throw GeometryError("singular transform applied to '" + p.source_id + "'");
    }
    switch (p.kind) {
        case PrimitiveKind::Line:
            return Primitive::line(t.apply(p.p0), t.apply(p.p1), std::move(derived_id));
        case PrimitiveKind::PolySeg:
            return Primitive::poly_seg(t.apply(p.p0), t.apply(p.p1), std::move(derived_id));
        case PrimitiveKind::Circle:
        case PrimitiveKind::Arc: break;
    }
    if (!t.is_conformal()) {
        throw NonConformalOnCurve("non-uniform scale applied to " + std::string(to_string(p.kind)) +
                                  " '" + p.source_id + "'");
    }
    const double scale = t.uniform_scale();
    const Vec2 center = t.apply(p.center);
    if (p.kind == PrimitiveKind::Circle) {
        return Primitive::circle(center, p.radius * scale, std::move(derived_id));
    }
    if (det > 0.0) {
        // Rotation by theta: every angle shifts by theta.
        const double theta = std::atan2(t.c, t.a);
        return Primitive::arc(center, p.radius * scale, p.start_angle + theta, p.end_angle + theta,
                              std::move(derived_id));
    }
    // Reflection across the axis at phi/2 maps angle alpha to phi - alpha and
    // reverses orientation, so the CCW range runs from the image of the end.
    const double phi = std::atan2(t.c, t.a);
    return Primitive::arc(center, p.radius * scale, phi - p.end_angle, phi - p.start_angle,
                          std::move(derived_id));
}

std::vector<Vec2> sample_points(const Primitive& p, int n) {
    if (n < 2) throw GeometryError("sample_points needs n >= 2");
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(n));
    switch (p.kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg: {
            const Vec2 d = p.p1 - p.p0;
            for (int k = 0; k < n; ++k) {
                if (k == n - 1) {
                    out.push_back(p.p1);
                } else {
                    out.push_back(p.p0 + (static_cast<double>(k) / (n - 1)) * d);
                }
            }
            break;
        }
        case PrimitiveKind::Arc: {
            const double sweep = p.sweep();
            for (int k = 0; k < n; ++k) {
                out.push_back(p.point_at_angle(p.start_angle + sweep * k / (n - 1)));
            }
            break;
        }
        case PrimitiveKind::Circle:
            for (int k = 0; k < n; ++k) out.push_back(p.point_at_angle(kTwoPi * k / n));
            break;
    }
    return out;
}

bool intersects(const Primitive& p, const Rect& window, double tol) {
    const Rect r = window.expanded(tol);
    switch (p.kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg: return segment_intersects_rect(p.p0, p.p1, r);
        case PrimitiveKind::Circle: {
            const double cx = std::clamp(p.center.x, r.min_x, r.max_x);
            const double cy = std::clamp(p.center.y, r.min_y, r.max_y);
            const double nearest = distance(p.center, {cx, cy});
            const double far_x = std::max(std::abs(p.center.x - r.min_x), std::abs(p.center.x - r.max_x));
            const double far_y = std::max(std::abs(p.center.y - r.min_y), std::abs(p.center.y - r.max_y));
            const double farthest = std::hypot(far_x, far_y);
            return nearest <= p.radius && p.radius <= farthest;
        }
        case PrimitiveKind::Arc: {
            if (r.contains(p.start_point()) || r.contains(p.end_point())) return true;
            // With both endpoints outside, the arc meets the rect only by
            // crossing its boundary.
            std::vector<double> angles;
            const std::array<std::pair<Vec2, Vec2>, 4> edges = {{
                {{r.min_x, r.min_y}, {r.max_x, r.min_y}},
                {{r.max_x, r.min_y}, {r.max_x, r.max_y}},
                {{r.max_x, r.max_y}, {r.min_x, r.max_y}},
                {{r.min_x, r.max_y}, {r.min_x, r.min_y}},
            }};
            for (const auto& [a, b] : edges) circle_segment_angles(p.center, p.radius, a, b, angles);
            return std::any_of(angles.begin(), angles.end(),
                               [&](double a) { return angle_in_arc(p, a); });
        }
    }
    return false;
}

}  // namespace plancad::geometry
