#include "plancad/chunker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <numbers>
#include <stdexcept>

#include "plancad/errors.hpp"

namespace plancad::chunker {

namespace {

using geometry::Affine;
using geometry::PrimitiveKind;
using geometry::Rect;

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    if (std::strcmp(buf, "-0") == 0) return "0";
    return buf;
}

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out += s[i];
            continue;
        }
        const std::size_t semi = s.find(';', i);
        if (semi == std::string_view::npos) throw std::invalid_argument("unterminated entity");
        const std::string_view ent = s.substr(i + 1, semi - i - 1);
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else throw std::invalid_argument("unknown entity '&" + std::string(ent) + ";'");
        i = semi;
    }
    return out;
}

struct Tag {
    std::string name;
    std::map<std::string, std::string> attrs;
};

// Minimal scanner for the start tags of the chunk markup.
std::vector<Tag> scan_tags(std::string_view text) {
    std::vector<Tag> tags;
    std::size_t pos = 0;
    while ((pos = text.find('<', pos)) != std::string_view::npos) {
        if (text.substr(pos, 4) == "<!--") {
            const std::size_t end = text.find("-->", pos);
            if (end == std::string_view::npos) throw FormatError(FormatErrorKind::BadHeader, "!--", "unterminated comment");
            pos = end + 3;
            continue;
        }
        const std::size_t end = text.find('>', pos);
        if (end == std::string_view::npos) throw FormatError(FormatErrorKind::BadHeader, "?", "unterminated tag");
        std::string_view body = text.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (body.empty() || body.front() == '/' || body.front() == '?' || body.front() == '!') continue;
        if (body.back() == '/') body.remove_suffix(1);
        Tag tag;
        std::size_t i = 0;
        while (i < body.size() && !std::isspace(static_cast<unsigned char>(body[i]))) ++i;
        tag.name = std::string(body.substr(0, i));
        for (;;) {
            while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
            if (i >= body.size()) break;
            const std::size_t eq = body.find('=', i);
            if (eq == std::string_view::npos || eq + 1 >= body.size() || body[eq + 1] != '"') {
                throw FormatError(FormatErrorKind::MalformedGeometry, tag.name, "malformed attribute list");
            }
            const std::string key(body.substr(i, eq - i));
            const std::size_t close = body.find('"', eq + 2);
            if (close == std::string_view::npos) {
                throw FormatError(FormatErrorKind::MalformedGeometry, tag.name, "unterminated attribute '" + key + "'");
            }
            try {
                tag.attrs[key] = unescape(body.substr(eq + 2, close - eq - 2));
            } catch (const std::invalid_argument& e) {
                throw FormatError(FormatErrorKind::MalformedGeometry, tag.name, e.what());
            }
            i = close + 1;
        }
        tags.push_back(std::move(tag));
    }
    return tags;
}

const std::string& require(const Tag& tag, const char* key, FormatErrorKind kind) {
    auto it = tag.attrs.find(key);
    if (it == tag.attrs.end()) {
        throw FormatError(kind, tag.name, std::string("missing attribute '") + key + "'");
    }
    return it->second;
}

std::vector<double> numbers(const Tag& tag, const std::string& text, std::size_t expected,
                            FormatErrorKind kind) {
    std::vector<double> out;
    const char* p = text.c_str();
    for (;;) {
        while (*p == ' ') ++p;
        if (*p == '\0') break;
        char* end = nullptr;
        const double v = std::strtod(p, &end);
        if (end == p || !std::isfinite(v) || (*end != ' ' && *end != '\0')) {
            throw FormatError(kind, tag.name, "bad number in '" + text + "'");
        }
        out.push_back(v);
        p = end;
    }
    if (out.size() != expected) {
        throw FormatError(kind, tag.name, "expected " + std::to_string(expected) + " numbers in '" + text + "'");
    }
    return out;
}

double number(const Tag& tag, const char* key) {
    return numbers(tag, require(tag, key, FormatErrorKind::MalformedGeometry), 1,
                   FormatErrorKind::MalformedGeometry)[0];
}

int integer(const Tag& tag, const char* key, FormatErrorKind kind) {
    const std::string& text = require(tag, key, FormatErrorKind::MissingAttribute);
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (text.empty() || *end != '\0') {
        throw FormatError(kind, tag.name, std::string("attribute '") + key + "' is not an integer");
    }
    return static_cast<int>(v);
}

void emit_primitive(std::string& out, const ChunkPrimitive& cp, const ClassCatalog& catalog) {
    const Primitive& p = cp.primitive;
    switch (p.kind) {
        case PrimitiveKind::Line:
        case PrimitiveKind::PolySeg:
            out += "<line data-kind=\"";
            out += geometry::to_string(p.kind);
            out += "\" x1=\"" + fmt9(p.p0.x) + "\" y1=\"" + fmt9(p.p0.y) + "\" x2=\"" + fmt9(p.p1.x) +
                   "\" y2=\"" + fmt9(p.p1.y) + "\"";
            break;
        case PrimitiveKind::Arc: {
            const Vec2 s = p.start_point();
            const Vec2 e = p.end_point();
            const bool large = p.sweep() > std::numbers::pi;
            out += "<path data-kind=\"arc\" d=\"M " + fmt9(s.x) + " " + fmt9(s.y) + " A " + fmt9(p.radius) +
                   " " + fmt9(p.radius) + " 0 " + (large ? "1" : "0") + " 1 " + fmt9(e.x) + " " + fmt9(e.y) +
                   "\" data-arc=\"" + fmt9(p.center.x) + " " + fmt9(p.center.y) + " " + fmt9(p.radius) + " " +
                   fmt9(p.start_angle * kRadToDeg) + " " + fmt9(p.end_angle * kRadToDeg) + "\"";
            break;
        }
        case PrimitiveKind::Circle:
            out += "<circle data-kind=\"circle\" cx=\"" + fmt9(p.center.x) + "\" cy=\"" + fmt9(p.center.y) +
                   "\" r=\"" + fmt9(p.radius) + "\"";
            break;
    }
    out += " data-semantic=\"" + escape(catalog.name(cp.label.cls)) + "\"";
    out += " data-instance=\"" + std::to_string(cp.label.instance) + "\"";
    out += " data-source=\"" + escape(p.source_id) + "\"";
    if (cp.score) out += " data-score=\"" + fmt9(*cp.score) + "\"";
    out += "/>\n";
}

Chunk parse_header(const Tag& svg) {
    const auto bad = [&](const std::string& why) { return FormatError(FormatErrorKind::BadHeader, "svg", why); };
    auto get = [&](const char* key) -> const std::string& {
        auto it = svg.attrs.find(key);
        if (it == svg.attrs.end()) throw bad(std::string("missing attribute '") + key + "'");
        return it->second;
    };
    if (get("data-schema") != kChunkSchema) throw bad("unsupported schema '" + get("data-schema") + "'");
    Chunk c;
    c.id.drawing_id = get("data-drawing");
    try {
        c.id.col = std::stoi(get("data-col"));
        c.id.row = std::stoi(get("data-row"));
        const auto origin = numbers(svg, get("data-origin"), 2, FormatErrorKind::BadHeader);
        c.origin = {origin[0], origin[1]};
        c.size_m = numbers(svg, get("data-size"), 1, FormatErrorKind::BadHeader)[0];
    } catch (const std::logic_error&) {
        throw bad("malformed chunk id");
    }
    if (!(c.size_m > 0.0)) throw bad("chunk size must be positive");
    std::vector<screening::ClassInfo> classes;
    const std::string& spec = get("data-classes");
    std::size_t pos = 0;
    while (pos < spec.size()) {
        std::size_t end = spec.find(' ', pos);
        if (end == std::string::npos) end = spec.size();
        const std::string item = spec.substr(pos, end - pos);
        pos = end + 1;
        if (item.empty()) continue;
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) throw bad("class entry '" + item + "' lacks ':thing' or ':stuff'");
        const std::string kind = item.substr(colon + 1);
        if (kind != "thing" && kind != "stuff") throw bad("class entry '" + item + "' has bad kind");
        classes.push_back({item.substr(0, colon), kind == "thing"});
    }
    try {
        c.catalog = ClassCatalog(std::move(classes));
    } catch (const std::invalid_argument& e) {
        throw bad(e.what());
    }
    return c;
}

ChunkPrimitive parse_element(const Tag& tag, const ClassCatalog& catalog) {
    using K = FormatErrorKind;
    const std::string& semantic = require(tag, "data-semantic", K::MissingAttribute);
    require(tag, "data-instance", K::MissingAttribute);
    const std::string& source = require(tag, "data-source", K::MissingAttribute);

    ChunkPrimitive cp;
    const auto cls = catalog.find(semantic);
    if (!cls) throw FormatError(K::UnknownClass, tag.name, "unknown class name '" + semantic + "'");
    cp.label.cls = *cls;
    cp.label.instance = integer(tag, "data-instance", K::InvalidLabel);
    if (cp.label.instance < 0) throw FormatError(K::InvalidLabel, tag.name, "negative instance id");
    if (cp.label.instance > 0 && !catalog.is_thing(cp.label.cls)) {
        throw FormatError(K::InvalidLabel, tag.name, "instance id on non-thing class '" + semantic + "'");
    }
    if (auto it = tag.attrs.find("data-score"); it != tag.attrs.end()) {
        const double s = numbers(tag, it->second, 1, K::InvalidLabel)[0];
        if (s < 0.0 || s > 1.0) throw FormatError(K::InvalidLabel, tag.name, "score outside [0,1]");
        cp.score = s;
    }

    const auto kind_it = tag.attrs.find("data-kind");
    const std::string kind = kind_it != tag.attrs.end() ? kind_it->second : tag.name;
    try {
        if (tag.name == "line" && (kind == "line" || kind == "polyseg")) {
            const Vec2 a{number(tag, "x1"), number(tag, "y1")};
            const Vec2 b{number(tag, "x2"), number(tag, "y2")};
            cp.primitive = kind == "line" ? Primitive::line(a, b, source) : Primitive::poly_seg(a, b, source);
        } else if (tag.name == "path" && kind == "arc") {
            const auto v = numbers(tag, require(tag, "data-arc", K::MissingAttribute), 5, K::MalformedGeometry);
            cp.primitive = Primitive::arc({v[0], v[1]}, v[2], v[3] * kDegToRad, v[4] * kDegToRad, source);
        } else if (tag.name == "circle" && kind == "circle") {
            cp.primitive = Primitive::circle({number(tag, "cx"), number(tag, "cy")}, number(tag, "r"), source);
        } else {
            throw FormatError(K::MalformedGeometry, tag.name, "unsupported element kind '" + kind + "'");
        }
    } catch (const GeometryError& e) {
        throw FormatError(K::MalformedGeometry, tag.name, e.what());
    }
    return cp;
}

}  // namespace

std::string ChunkId::str() const {
    return drawing_id + "_c" + std::to_string(col) + "_r" + std::to_string(row);
}

bool approx_equal(const Chunk& a, const Chunk& b, double tol) {
    if (!(a.id == b.id) || !(a.catalog == b.catalog) || a.primitives.size() != b.primitives.size()) return false;
    if (std::abs(a.origin.x - b.origin.x) > tol || std::abs(a.origin.y - b.origin.y) > tol) return false;
    if (std::abs(a.size_m - b.size_m) > tol) return false;
    for (std::size_t i = 0; i < a.primitives.size(); ++i) {
        const auto& p = a.primitives[i];
        const auto& q = b.primitives[i];
        if (p.source_id() != q.source_id() || !(p.label == q.label) || p.score != q.score) return false;
        if (!geometry::approx_equal(p.primitive, q.primitive, tol)) return false;
    }
    return true;
}

std::vector<Chunk> chunk_drawing(const annotator::AnnotatedDrawing& ann, const std::string& drawing_id,
                                 double size_m) {
    if (!(size_m > 0.0)) throw std::invalid_argument("chunk size must be positive");
    const auto& prims = ann.drawing->primitives;
    if (prims.empty()) throw NoExtent("drawing '" + drawing_id + "' has no primitives");

    const Affine to_meters = Affine::scaling(ann.drawing->unit_scale);
    std::vector<Primitive> world;
    world.reserve(prims.size());
    Rect extent;
    for (std::size_t i = 0; i < prims.size(); ++i) {
        world.push_back(geometry::apply_transform(prims[i].primitive, to_meters, prims[i].primitive.source_id));
        const Rect box = geometry::primitive_aabb(world.back());
        extent = i == 0 ? box : extent.united(box);
    }
    constexpr double tol = geometry::kTolerance;
    const int cols = std::max(1, static_cast<int>(std::ceil(extent.width() / size_m - tol)));
    const int rows = std::max(1, static_cast<int>(std::ceil(extent.height() / size_m - tol)));

    std::map<std::pair<int, int>, Chunk> chunks;  // (row, col)
    for (std::size_t i = 0; i < world.size(); ++i) {
        const Rect box = geometry::primitive_aabb(world[i]);
        const auto cell = [&](double v, double origin, int count) {
            return std::clamp(static_cast<int>(std::floor((v - origin) / size_m)), 0, count - 1);
        };
        const int c0 = cell(box.min_x - tol, extent.min_x, cols);
        const int c1 = cell(box.max_x + tol, extent.min_x, cols);
        const int r0 = cell(box.min_y - tol, extent.min_y, rows);
        const int r1 = cell(box.max_y + tol, extent.min_y, rows);
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const Vec2 origin{extent.min_x + c * size_m, extent.min_y + r * size_m};
                const Rect window{origin.x, origin.y, origin.x + size_m, origin.y + size_m};
                if (!geometry::intersects(world[i], window, tol)) continue;
                auto [it, inserted] = chunks.try_emplace({r, c});
                Chunk& chunk = it->second;
                if (inserted) {
                    chunk.id = {drawing_id, c, r};
                    chunk.origin = origin;
                    chunk.size_m = size_m;
                    chunk.catalog = ann.catalog;
                }
                ChunkPrimitive cp;
                cp.primitive = geometry::apply_transform(world[i], Affine::translation(-origin.x, -origin.y),
                                                         world[i].source_id);
                cp.label = ann.labels[i];
                chunk.primitives.push_back(std::move(cp));
            }
        }
    }
    std::vector<Chunk> out;
    out.reserve(chunks.size());
    for (auto& [_, chunk] : chunks) {
        // Markup order, so an imported chunk compares equal to its source.
        std::sort(chunk.primitives.begin(), chunk.primitives.end(),
                  [](const ChunkPrimitive& a, const ChunkPrimitive& b) { return a.source_id() < b.source_id(); });
        out.push_back(std::move(chunk));
    }
    return out;
}

std::string export_chunk(const Chunk& chunk) {
    std::string classes;
    for (const auto& info : chunk.catalog.classes()) {
        if (!classes.empty()) classes += ' ';
        classes += info.name + (info.is_thing ? ":thing" : ":stuff");
    }
    const std::string size = fmt9(chunk.size_m);
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" data-schema=\"" + std::string(kChunkSchema) +
           "\" data-drawing=\"" + escape(chunk.id.drawing_id) + "\" data-col=\"" + std::to_string(chunk.id.col) +
           "\" data-row=\"" + std::to_string(chunk.id.row) + "\" data-origin=\"" + fmt9(chunk.origin.x) + " " +
           fmt9(chunk.origin.y) + "\" data-size=\"" + size + "\" data-classes=\"" + escape(classes) +
           "\" viewBox=\"0 0 " + size + " " + size + "\">\n";
    out += "<g transform=\"matrix(1 0 0 -1 0 " + size + ")\" fill=\"none\" stroke=\"black\">\n";
    std::vector<const ChunkPrimitive*> order;
    order.reserve(chunk.primitives.size());
    for (const auto& p : chunk.primitives) order.push_back(&p);
    std::sort(order.begin(), order.end(),
              [](const ChunkPrimitive* a, const ChunkPrimitive* b) { return a->source_id() < b->source_id(); });
    for (const auto* p : order) emit_primitive(out, *p, chunk.catalog);
    out += "</g>\n</svg>\n";
    return out;
}

Chunk import_chunk(std::string_view text) {
    const auto tags = scan_tags(text);
    auto svg = std::find_if(tags.begin(), tags.end(), [](const Tag& t) { return t.name == "svg"; });
    if (svg == tags.end()) throw FormatError(FormatErrorKind::BadHeader, "svg", "no <svg> root element");
    Chunk chunk = parse_header(*svg);
    for (auto it = std::next(svg); it != tags.end(); ++it) {
        if (it->name == "g" || it->name == "svg") continue;
        chunk.primitives.push_back(parse_element(*it, chunk.catalog));
    }
    return chunk;
}

ImageGrid render_chunk(const Chunk& chunk, int width, int height, double stroke_px) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("render size must be positive");
    if (!(stroke_px > 0.0)) throw std::invalid_argument("stroke width must be positive");
    ImageGrid grid;
    grid.width = width;
    grid.height = height;
    grid.channels = 1;
    grid.values.assign(static_cast<std::size_t>(width) * height, 0.0f);

    const double pitch_x = chunk.size_m / width;
    const double pitch_y = chunk.size_m / height;
    const double step = 0.25 * std::min(pitch_x, pitch_y);
    const double r = stroke_px / 2.0;
    for (const auto& cp : chunk.primitives) {
        const double length = geometry::primitive_length(cp.primitive);
        const int n = std::max(2, static_cast<int>(std::ceil(length / step)) + 1);
        for (const Vec2 q : geometry::sample_points(cp.primitive, n)) {
            // Pixel units: pixel i spans [i, i+1) with its center at i + 0.5.
            const double u = q.x / pitch_x;
            const double v = q.y / pitch_y;
            const int i0 = std::max(0, static_cast<int>(std::floor(u - 0.5 - r)) + 1);
            const int i1 = std::min(width - 1, static_cast<int>(std::floor(u - 0.5 + r)));
            const int j0 = std::max(0, static_cast<int>(std::floor(v - 0.5 - r)) + 1);
            const int j1 = std::min(height - 1, static_cast<int>(std::floor(v - 0.5 + r)));
            for (int j = j0; j <= j1; ++j) {
                for (int i = i0; i <= i1; ++i) grid.values[static_cast<std::size_t>(j) * width + i] = 1.0f;
            }
        }
    }
    return grid;
}

std::string to_pgm(const ImageGrid& grid) {
    std::string out = "P2\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n255\n";
    for (int row = grid.height - 1; row >= 0; --row) {
        for (int col = 0; col < grid.width; ++col) {
            const float v = std::clamp(grid.at(col, row, 0), 0.0f, 1.0f);
            // Ink is dark on a white page.
            out += std::to_string(255 - static_cast<int>(std::lround(v * 255.0f)));
            out += col + 1 < grid.width ? ' ' : '\n';
        }
    }
    return out;
}

std::string to_raw_grid(const ImageGrid& grid) {
    std::string out = "plancad-grid/1 " + std::to_string(grid.height) + " " + std::to_string(grid.width) + " " +
                      std::to_string(grid.channels) + "\n";
    const std::size_t header = out.size();
    out.resize(header + grid.values.size() * 4);
    for (std::size_t k = 0; k < grid.values.size(); ++k) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &grid.values[k], 4);
        for (int b = 0; b < 4; ++b) out[header + 4 * k + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    return out;
}

}  // namespace plancad::chunker

namespace plancad {

const char* to_string(FormatErrorKind kind) {
    switch (kind) {
        case FormatErrorKind::BadHeader: return "BadHeader";
        case FormatErrorKind::MissingAttribute: return "MissingAttribute";
        case FormatErrorKind::UnknownClass: return "UnknownClass";
        case FormatErrorKind::MalformedGeometry: return "MalformedGeometry";
        case FormatErrorKind::InvalidLabel: return "InvalidLabel";
    }
    return "FormatError";
}

}  // namespace plancad
