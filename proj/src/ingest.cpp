#include "plancad/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <set>
#include <unordered_set>

#include "plancad/errors.hpp"

namespace plancad::ingest {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Pair {
    int code = 0;
    std::string value;
    std::size_t line = 0;  // 1-based line of the group code
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<Pair> tokenize(std::string_view source) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < source.size()) {
        const std::size_t nl = source.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(source.substr(pos));
            break;
        }
        lines.push_back(source.substr(pos, nl - pos));
        pos = nl + 1;
    }
    std::vector<Pair> pairs;
    pairs.reserve(lines.size() / 2);
    for (std::size_t i = 0; i < lines.size(); i += 2) {
        const std::string_view code_text = trim(lines[i]);
        if (i + 1 >= lines.size()) {
            // A trailing blank line is tolerated; a dangling code is not.
            if (code_text.empty()) break;
            throw ParseError(i + 1, "group code without a value (stream ends mid-pair)");
        }
        char* end = nullptr;
        const std::string code_str(code_text);
        const long code = std::strtol(code_str.c_str(), &end, 10);
        if (code_str.empty() || *end != '\0') {
            throw ParseError(i + 1, "expected an integer group code, got '" + code_str + "'");
        }
        std::string_view value = lines[i + 1];
        if (!value.empty() && value.back() == '\r') value.remove_suffix(1);
        pairs.push_back({static_cast<int>(code), std::string(value), i + 1});
    }
    return pairs;
}

double to_double(const Pair& p) {
    const std::string v(trim(p.value));
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || !std::isfinite(d)) {
        throw ParseError(p.line + 1, "expected a number for group " + std::to_string(p.code) +
                                         ", got '" + v + "'");
    }
    return d;
}

long to_int(const Pair& p) {
    const std::string v(trim(p.value));
    char* end = nullptr;
    const long n = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') {
        throw ParseError(p.line + 1, "expected an integer for group " + std::to_string(p.code) +
                                         ", got '" + v + "'");
    }
    return n;
}

std::string value_of(const Pair& p) { return std::string(trim(p.value)); }

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct PendingRef {
    std::string block_name;
    std::size_t line;
};

class Parser {
public:
    Parser(std::vector<Pair> pairs, const ParseOptions& options, ParseReport& report)
        : pairs_(std::move(pairs)), options_(options), report_(report) {}

    DrawingDocument run() {
        while (!at_end()) {
            const Pair& p = next();
            if (p.code != 0) throw ParseError(p.line, "expected group 0 at top level");
            const std::string kw = value_of(p);
            if (kw == "EOF") break;
            if (kw != "SECTION") throw ParseError(p.line, "expected SECTION, got '" + kw + "'");
            if (at_end() || peek().code != 2) throw ParseError(p.line, "SECTION without a name");
            const std::string name = value_of(next());
            if (name == "HEADER") {
                header(p.line);
            } else if (name == "TABLES") {
                tables(p.line);
            } else if (name == "BLOCKS") {
                blocks(p.line);
            } else if (name == "ENTITIES") {
                entities_section(p.line);
            } else {
                skip_section(p.line);
            }
        }
        for (const auto& ref : pending_refs_) {
            if (!doc_.blocks.contains(ref.block_name)) {
                throw ParseError(ref.line, "reference to undefined block '" + ref.block_name + "'");
            }
        }
        if (options_.unit_scale_override) {
            doc_.unit_scale = *options_.unit_scale_override;
        } else if (doc_.insunits) {
            doc_.unit_scale =
                unit_scale_for_insunits(*doc_.insunits).value_or(options_.default_unit_scale);
        } else {
            doc_.unit_scale = options_.default_unit_scale;
        }
        if (!(doc_.unit_scale > 0.0)) throw ParseError(0, "unit scale must be positive");
        for (const auto& e : doc_.entities) note_layer(entity_layer(e));
        for (const auto& [_, block] : doc_.blocks) {
            for (const auto& e : block.entities) note_layer(entity_layer(e));
        }
        return std::move(doc_);
    }

private:
    bool at_end() const { return pos_ >= pairs_.size(); }
    const Pair& peek() const { return pairs_[pos_]; }
    const Pair& next() { return pairs_[pos_++]; }

    bool at_keyword(const char* kw) const {
        return !at_end() && peek().code == 0 && value_of(peek()) == kw;
    }

    void expect_more(std::size_t section_line, const char* what) const {
        if (at_end()) throw ParseError(section_line, std::string("unterminated ") + what);
    }

    // Consumes pairs up to (not including) the next group 0.
    std::vector<Pair> body() {
        std::vector<Pair> out;
        while (!at_end() && peek().code != 0) out.push_back(next());
        return out;
    }

    void header(std::size_t line) {
        for (;;) {
            expect_more(line, "HEADER section");
            if (at_keyword("ENDSEC")) {
                next();
                return;
            }
            const Pair& p = next();
            if (p.code == 9 && value_of(p) == "$INSUNITS") {
                if (at_end() || peek().code != 70) throw ParseError(p.line, "$INSUNITS without group 70");
                doc_.insunits = static_cast<int>(to_int(next()));
            }
        }
    }

    void tables(std::size_t line) {
        for (;;) {
            expect_more(line, "TABLES section");
            if (at_keyword("ENDSEC")) {
                next();
                return;
            }
            const Pair& p = next();
            if (p.code == 0 && value_of(p) == "LAYER") {
                LayerRecord layer;
                long color = 7;
                long flags = 0;
                for (const Pair& q : body()) {
                    if (q.code == 2) layer.name = value_of(q);
                    if (q.code == 62) color = to_int(q);
                    if (q.code == 70) flags = to_int(q);
                }
                if (layer.name.empty()) throw ParseError(p.line, "LAYER record without a name");
                layer.visible = color >= 0 && (flags & 1) == 0;
                add_layer(layer, p.line);
            }
        }
    }

    void blocks(std::size_t line) {
        for (;;) {
            expect_more(line, "BLOCKS section");
            if (at_keyword("ENDSEC")) {
                next();
                return;
            }
            const Pair& p = next();
            if (p.code != 0) continue;
            if (value_of(p) != "BLOCK") {
                body();
                continue;
            }
            BlockDef block;
            for (const Pair& q : body()) {
                if (q.code == 2) block.name = value_of(q);
                if (q.code == 10) block.base.x = to_double(q);
                if (q.code == 20) block.base.y = to_double(q);
            }
            if (block.name.empty()) throw ParseError(p.line, "BLOCK without a name");
            if (doc_.blocks.contains(block.name)) {
                throw ParseError(p.line, "duplicate block '" + block.name + "'");
            }
            std::unordered_set<std::string> handles;
            for (;;) {
                if (at_end()) throw ParseError(p.line, "unterminated BLOCK '" + block.name + "'");
                if (at_keyword("ENDBLK")) {
                    next();
                    body();
                    break;
                }
                if (at_keyword("ENDSEC")) {
                    throw ParseError(peek().line, "BLOCK '" + block.name + "' missing ENDBLK");
                }
                read_entity(block.entities, handles, "B" + std::to_string(doc_.blocks.size()) + ".");
            }
            doc_.blocks.emplace(block.name, std::move(block));
        }
    }

    void entities_section(std::size_t line) {
        for (;;) {
            expect_more(line, "ENTITIES section");
            if (at_keyword("ENDSEC")) {
                next();
                return;
            }
            read_entity(doc_.entities, top_handles_, "");
        }
    }

    void skip_section(std::size_t line) {
        for (;;) {
            expect_more(line, "section");
            if (at_keyword("ENDSEC")) {
                next();
                return;
            }
            next();
        }
    }

    std::string take_handle(const std::string& given, std::unordered_set<std::string>& handles,
                            const std::string& auto_prefix, std::size_t line) {
        std::string h = given;
        if (h.empty()) {
            do {
                h = "auto" + auto_prefix + std::to_string(++auto_handle_);
            } while (handles.contains(h));
        }
        if (h.find('/') != std::string::npos || h.find('#') != std::string::npos) {
            throw ParseError(line, "handle '" + h + "' contains a reserved character");
        }
        if (!handles.insert(h).second) throw ParseError(line, "duplicate handle '" + h + "'");
        return h;
    }

    void read_entity(std::vector<Entity>& out, std::unordered_set<std::string>& handles,
                     const std::string& auto_prefix) {
        const Pair& head = next();
        if (head.code != 0) throw ParseError(head.line, "expected group 0 before entity data");
        const std::string type = value_of(head);
        const std::vector<Pair> fields = body();
        ++report_.entities_read;

        std::string handle;
        std::string layer = kPlaceholderLayer;
        for (const Pair& q : fields) {
            if (q.code == 5) handle = value_of(q);
            if (q.code == 8) layer = value_of(q);
        }
        auto skip = [&](const std::string& why) { ++report_.skipped[why]; };

        if (type == "LINE") {
            LineEntity e{"", layer, {}, {}};
            for (const Pair& q : fields) {
                if (q.code == 10) e.start.x = to_double(q);
                if (q.code == 20) e.start.y = to_double(q);
                if (q.code == 11) e.end.x = to_double(q);
                if (q.code == 21) e.end.y = to_double(q);
            }
            if (geometry::distance(e.start, e.end) <= geometry::kTolerance) return skip("LINE(degenerate)");
            e.handle = take_handle(handle, handles, auto_prefix, head.line);
            out.emplace_back(std::move(e));
        } else if (type == "ARC") {
            ArcEntity e{"", layer, {}, 0.0, 0.0, 0.0};
            for (const Pair& q : fields) {
                if (q.code == 10) e.center.x = to_double(q);
                if (q.code == 20) e.center.y = to_double(q);
                if (q.code == 40) e.radius = to_double(q);
                if (q.code == 50) e.start_deg = to_double(q);
                if (q.code == 51) e.end_deg = to_double(q);
            }
            const double sweep = geometry::normalize_angle((e.end_deg - e.start_deg) * kDegToRad);
            if (!(e.radius > 0.0) || sweep * e.radius <= geometry::kTolerance) return skip("ARC(degenerate)");
            e.handle = take_handle(handle, handles, auto_prefix, head.line);
            out.emplace_back(std::move(e));
        } else if (type == "CIRCLE") {
            CircleEntity e{"", layer, {}, 0.0};
            for (const Pair& q : fields) {
                if (q.code == 10) e.center.x = to_double(q);
                if (q.code == 20) e.center.y = to_double(q);
                if (q.code == 40) e.radius = to_double(q);
            }
            if (!(e.radius > 0.0)) return skip("CIRCLE(degenerate)");
            e.handle = take_handle(handle, handles, auto_prefix, head.line);
            out.emplace_back(std::move(e));
        } else if (type == "LWPOLYLINE") {
            PolylineEntity e;
            e.layer = layer;
            for (const Pair& q : fields) {
                if (q.code == 70) e.closed = (to_int(q) & 1) != 0;
                if (q.code == 10) {
                    e.vertices.push_back({to_double(q), 0.0});
                    e.bulges.push_back(0.0);
                }
                if (q.code == 20) {
                    if (e.vertices.empty()) throw ParseError(q.line, "vertex y before x");
                    e.vertices.back().y = to_double(q);
                }
                if (q.code == 42) {
                    if (e.vertices.empty()) throw ParseError(q.line, "bulge before any vertex");
                    e.bulges.back() = to_double(q);
                }
            }
            if (e.vertices.size() < 2) return skip("LWPOLYLINE(degenerate)");
            e.handle = take_handle(handle, handles, auto_prefix, head.line);
            out.emplace_back(std::move(e));
        } else if (type == "INSERT") {
            BlockRef base;
            base.layer = layer;
            long columns = 1;
            long rows = 1;
            double column_spacing = 0.0;
            double row_spacing = 0.0;
            std::size_t name_line = head.line;
            for (const Pair& q : fields) {
                if (q.code == 2) {
                    base.block_name = value_of(q);
                    name_line = q.line;
                }
                if (q.code == 10) base.insert.x = to_double(q);
                if (q.code == 20) base.insert.y = to_double(q);
                if (q.code == 41) base.scale_x = to_double(q);
                if (q.code == 42) base.scale_y = to_double(q);
                if (q.code == 50) base.rotation_deg = to_double(q);
                if (q.code == 70) columns = to_int(q);
                if (q.code == 71) rows = to_int(q);
                if (q.code == 44) column_spacing = to_double(q);
                if (q.code == 45) row_spacing = to_double(q);
            }
            if (base.block_name.empty()) throw ParseError(head.line, "INSERT without a block name");
            if (base.scale_x == 0.0 || base.scale_y == 0.0) {
                throw ParseError(head.line, "INSERT with a zero scale factor");
            }
            columns = std::max(columns, 1L);
            rows = std::max(rows, 1L);
            pending_refs_.push_back({base.block_name, name_line});
            const std::string root = take_handle(handle, handles, auto_prefix, head.line);
            const Affine rot = Affine::rotation(base.rotation_deg * kDegToRad);
            for (long r = 0; r < rows; ++r) {
                for (long c = 0; c < columns; ++c) {
                    BlockRef ref = base;
                    if (r == 0 && c == 0) {
                        ref.ref_id = root;
                    } else {
                        ref.ref_id = take_handle(root + "@" + std::to_string(c) + "." + std::to_string(r),
                                                 handles, auto_prefix, head.line);
                        const Vec2 offset = rot.apply({c * column_spacing, r * row_spacing});
                        ref.insert = base.insert + offset;
                    }
                    out.emplace_back(std::move(ref));
                }
            }
        } else if (type == "TEXT" || type == "MTEXT") {
            TextEntity e;
            e.layer = layer;
            e.multiline = type == "MTEXT";
            std::string tail;
            for (const Pair& q : fields) {
                if (q.code == 10) e.anchor.x = to_double(q);
                if (q.code == 20) e.anchor.y = to_double(q);
                if (q.code == 1) tail = q.value;
                if (q.code == 3) e.content += q.value;
            }
            e.content += tail;
            e.handle = take_handle(handle, handles, auto_prefix, head.line);
            out.emplace_back(std::move(e));
        } else {
            skip(type);
        }
    }

    void add_layer(const LayerRecord& layer, std::size_t line) {
        if (!layer_names_.insert(layer.name).second) {
            throw ParseError(line, "duplicate layer '" + layer.name + "'");
        }
        doc_.layers.push_back(layer);
    }

    void note_layer(const std::string& name) {
        if (layer_names_.insert(name).second) doc_.layers.push_back({name, true});
    }

    std::vector<Pair> pairs_;
    std::size_t pos_ = 0;
    const ParseOptions& options_;
    ParseReport& report_;
    DrawingDocument doc_;
    std::set<std::string> layer_names_;
    std::unordered_set<std::string> top_handles_;
    std::vector<PendingRef> pending_refs_;
    std::size_t auto_handle_ = 0;
};

// Segment from a to b with the given bulge (tan of a quarter of the included
// angle; positive is CCW).
Primitive bulge_arc(Vec2 a, Vec2 b, double bulge, std::string id) {
    const double theta = 4.0 * std::atan(std::abs(bulge));
    const double chord = geometry::distance(a, b);
    const double radius = chord / (2.0 * std::sin(theta / 2.0));
    const Vec2 mid = 0.5 * (a + b);
    const Vec2 left{-(b.y - a.y) / chord, (b.x - a.x) / chord};
    const double h = (chord / 2.0) / std::tan(theta / 2.0);
    if (bulge > 0.0) {
        const Vec2 c = mid + h * left;
        return Primitive::arc(c, radius, std::atan2(a.y - c.y, a.x - c.x),
                              std::atan2(b.y - c.y, b.x - c.x), std::move(id));
    }
    const Vec2 c = mid + (-h) * left;
    return Primitive::arc(c, radius, std::atan2(b.y - c.y, b.x - c.x),
                          std::atan2(a.y - c.y, a.x - c.x), std::move(id));
}

void emit(std::string& out, int code, const std::string& value) {
    out += std::to_string(code);
    out += '\n';
    out += value;
    out += '\n';
}

void emit_entity(std::string& out, const Entity& entity) {
    std::visit(
        [&out](const auto& e) {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, LineEntity>) {
                emit(out, 0, "LINE");
                emit(out, 5, e.handle);
                emit(out, 8, e.layer);
                emit(out, 10, fmt_double(e.start.x));
                emit(out, 20, fmt_double(e.start.y));
                emit(out, 11, fmt_double(e.end.x));
                emit(out, 21, fmt_double(e.end.y));
            } else if constexpr (std::is_same_v<T, ArcEntity>) {
                emit(out, 0, "ARC");
                emit(out, 5, e.handle);
                emit(out, 8, e.layer);
                emit(out, 10, fmt_double(e.center.x));
                emit(out, 20, fmt_double(e.center.y));
                emit(out, 40, fmt_double(e.radius));
                emit(out, 50, fmt_double(e.start_deg));
                emit(out, 51, fmt_double(e.end_deg));
            } else if constexpr (std::is_same_v<T, CircleEntity>) {
                emit(out, 0, "CIRCLE");
                emit(out, 5, e.handle);
                emit(out, 8, e.layer);
                emit(out, 10, fmt_double(e.center.x));
                emit(out, 20, fmt_double(e.center.y));
                emit(out, 40, fmt_double(e.radius));
            } else if constexpr (std::is_same_v<T, PolylineEntity>) {
                emit(out, 0, "LWPOLYLINE");
                emit(out, 5, e.handle);
                emit(out, 8, e.layer);
                emit(out, 90, std::to_string(e.vertices.size()));
                emit(out, 70, e.closed ? "1" : "0");
                for (std::size_t i = 0; i < e.vertices.size(); ++i) {
                    emit(out, 10, fmt_double(e.vertices[i].x));
                    emit(out, 20, fmt_double(e.vertices[i].y));
                    if (e.bulges[i] != 0.0) emit(out, 42, fmt_double(e.bulges[i]));
                }
            } else if constexpr (std::is_same_v<T, BlockRef>) {
                emit(out, 0, "INSERT");
                emit(out, 5, e.ref_id);
                emit(out, 8, e.layer);
                emit(out, 2, e.block_name);
                emit(out, 10, fmt_double(e.insert.x));
                emit(out, 20, fmt_double(e.insert.y));
                if (e.scale_x != 1.0) emit(out, 41, fmt_double(e.scale_x));
                if (e.scale_y != 1.0) emit(out, 42, fmt_double(e.scale_y));
                if (e.rotation_deg != 0.0) emit(out, 50, fmt_double(e.rotation_deg));
            } else if constexpr (std::is_same_v<T, TextEntity>) {
                emit(out, 0, e.multiline ? "MTEXT" : "TEXT");
                emit(out, 5, e.handle);
                emit(out, 8, e.layer);
                emit(out, 10, fmt_double(e.anchor.x));
                emit(out, 20, fmt_double(e.anchor.y));
                emit(out, 1, e.content);
            }
        },
        entity);
}

class Flattener {
public:
    explicit Flattener(const DrawingDocument& doc) : doc_(doc) {}

    FlatDrawing run() {
        check_cycles();
        FlatDrawing flat;
        flat.layers = doc_.layers;
        flat.unit_scale = doc_.unit_scale;
        std::vector<ProvenanceLink> chain;
        expand(doc_.entities, Affine::identity(), nullptr, "", chain, flat.primitives);
        return flat;
    }

private:
    void check_cycles() const {
        // 0 = unvisited, 1 = on stack, 2 = done
        std::map<std::string, int> state;
        std::vector<std::string> stack;
        std::function<void(const std::string&)> visit = [&](const std::string& name) {
            state[name] = 1;
            stack.push_back(name);
            for (const auto& e : doc_.blocks.at(name).entities) {
                const auto* ref = std::get_if<BlockRef>(&e);
                if (ref == nullptr) continue;
                if (!doc_.blocks.contains(ref->block_name)) {
                    throw CycleError("block '" + name + "' references undefined block '" +
                                     ref->block_name + "'");
                }
                const int s = state[ref->block_name];
                if (s == 1) {
                    std::string cycle;
                    auto it = std::find(stack.begin(), stack.end(), ref->block_name);
                    for (; it != stack.end(); ++it) cycle += *it + " -> ";
                    throw CycleError("block cycle: " + cycle + ref->block_name);
                }
                if (s == 0) visit(ref->block_name);
            }
            stack.pop_back();
            state[name] = 2;
        };
        for (const auto& [name, _] : doc_.blocks) {
            if (state[name] == 0) visit(name);
        }
    }

    // inherited_layer is the effective layer of the enclosing reference, or
    // null at top level.
    void expand(const std::vector<Entity>& entities, const Affine& t, const std::string* inherited_layer,
                const std::string& id_prefix, std::vector<ProvenanceLink>& chain,
                std::vector<PlacedPrimitive>& out) const {
        for (const Entity& e : entities) {
            const std::string& own = entity_layer(e);
            const std::string& layer =
                (inherited_layer != nullptr && own == kPlaceholderLayer) ? *inherited_layer : own;
            if (const auto* ref = std::get_if<BlockRef>(&e)) {
                const BlockDef& block = doc_.blocks.at(ref->block_name);
                const Affine placed = t * ref->placement(block.base);
                chain.push_back({ref->block_name, ref->ref_id});
                expand(block.entities, placed, &layer, id_prefix + ref->ref_id + "/", chain, out);
                chain.pop_back();
                continue;
            }
            for (const Primitive& p : entity_primitives(e)) {
                PlacedPrimitive placed;
                placed.primitive = chain.empty() ? p : apply_transform(p, t, id_prefix + p.source_id);
                placed.layer = layer;
                placed.provenance = chain;
                out.push_back(std::move(placed));
            }
        }
    }

    const DrawingDocument& doc_;
};

}  // namespace

Affine BlockRef::placement(Vec2 block_base) const {
    return Affine::translation(insert.x, insert.y) * Affine::rotation(rotation_deg * kDegToRad) *
           Affine::scaling(scale_x, scale_y) * Affine::translation(-block_base.x, -block_base.y);
}

const std::string& entity_layer(const Entity& e) {
    return std::visit([](const auto& v) -> const std::string& { return v.layer; }, e);
}

std::vector<Primitive> entity_primitives(const Entity& entity) {
    std::vector<Primitive> out;
    std::visit(
        [&out](const auto& e) {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, LineEntity>) {
                out.push_back(Primitive::line(e.start, e.end, e.handle));
            } else if constexpr (std::is_same_v<T, ArcEntity>) {
                out.push_back(Primitive::arc(e.center, e.radius, e.start_deg * kDegToRad,
                                             e.end_deg * kDegToRad, e.handle));
            } else if constexpr (std::is_same_v<T, CircleEntity>) {
                out.push_back(Primitive::circle(e.center, e.radius, e.handle));
            } else if constexpr (std::is_same_v<T, PolylineEntity>) {
                const std::size_t n = e.vertices.size();
                const std::size_t segments = e.closed ? n : n - 1;
                for (std::size_t i = 0; i < segments; ++i) {
                    const Vec2 a = e.vertices[i];
                    const Vec2 b = e.vertices[(i + 1) % n];
                    // Repeated vertices contribute no segment.
                    if (geometry::distance(a, b) <= geometry::kTolerance) continue;
                    std::string id = e.handle + "#" + std::to_string(i);
                    if (e.bulges[i] != 0.0) {
                        out.push_back(bulge_arc(a, b, e.bulges[i], std::move(id)));
                    } else {
                        out.push_back(Primitive::poly_seg(a, b, std::move(id)));
                    }
                }
            }
        },
        entity);
    return out;
}

std::size_t ParseReport::skipped_total() const {
    std::size_t n = 0;
    for (const auto& [_, count] : skipped) n += count;
    return n;
}

std::optional<double> unit_scale_for_insunits(int code) {
    switch (code) {
        case 1: return 0.0254;
        case 2: return 0.3048;
        case 4: return 0.001;
        case 5: return 0.01;
        case 6: return 1.0;
        case 14: return 0.1;
        default: return std::nullopt;
    }
}

DrawingDocument parse_document(std::string_view source, const ParseOptions& options,
                               ParseReport* report) {
    ParseReport local;
    ParseReport& r = report != nullptr ? *report : local;
    r = {};
    Parser parser(tokenize(source), options, r);
    return parser.run();
}

std::string serialize_document(const DrawingDocument& doc) {
    std::string out;
    if (doc.insunits) {
        emit(out, 0, "SECTION");
        emit(out, 2, "HEADER");
        emit(out, 9, "$INSUNITS");
        emit(out, 70, std::to_string(*doc.insunits));
        emit(out, 0, "ENDSEC");
    }
    emit(out, 0, "SECTION");
    emit(out, 2, "TABLES");
    emit(out, 0, "TABLE");
    emit(out, 2, "LAYER");
    for (const auto& layer : doc.layers) {
        emit(out, 0, "LAYER");
        emit(out, 2, layer.name);
        emit(out, 70, "0");
        emit(out, 62, layer.visible ? "7" : "-7");
    }
    emit(out, 0, "ENDTAB");
    emit(out, 0, "ENDSEC");
    emit(out, 0, "SECTION");
    emit(out, 2, "BLOCKS");
    for (const auto& [name, block] : doc.blocks) {
        emit(out, 0, "BLOCK");
        emit(out, 2, name);
        emit(out, 10, fmt_double(block.base.x));
        emit(out, 20, fmt_double(block.base.y));
        for (const auto& e : block.entities) emit_entity(out, e);
        emit(out, 0, "ENDBLK");
    }
    emit(out, 0, "ENDSEC");
    emit(out, 0, "SECTION");
    emit(out, 2, "ENTITIES");
    for (const auto& e : doc.entities) emit_entity(out, e);
    emit(out, 0, "ENDSEC");
    emit(out, 0, "EOF");
    return out;
}

FlatDrawing flatten_blocks(const DrawingDocument& doc) { return Flattener(doc).run(); }

DrawingDocument scrub_text(const DrawingDocument& doc, ScrubPolicy policy, ScrubReport* report) {
    std::size_t affected = 0;
    auto scrub = [&](std::vector<Entity>& entities) {
        if (policy == ScrubPolicy::Drop) {
            const auto before = entities.size();
            std::erase_if(entities, [](const Entity& e) { return std::holds_alternative<TextEntity>(e); });
            affected += before - entities.size();
            return;
        }
        for (auto& e : entities) {
            if (auto* text = std::get_if<TextEntity>(&e)) {
                text->content.clear();
                ++affected;
            }
        }
    };
    DrawingDocument out = doc;
    scrub(out.entities);
    for (auto& [_, block] : out.blocks) scrub(block.entities);
    if (report != nullptr) report->affected = affected;
    return out;
}

}  // namespace plancad::ingest
