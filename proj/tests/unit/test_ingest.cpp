#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "plancad/errors.hpp"
#include "plancad/ingest.hpp"
#include "plancad/synthgen.hpp"
#include "plancad/workspace.hpp"

using namespace plancad;
using namespace plancad::ingest;

namespace {

std::string fixture(const std::string& name) {
    return workspace::read_file(std::string(PLANCAD_FIXTURES) + "/dxf/" + name);
}

// Builds a group-code stream by hand: each pair is "code\nvalue\n".
std::string pairs(std::initializer_list<std::pair<int, std::string>> items) {
    std::string out;
    for (const auto& [c, v] : items) out += std::to_string(c) + "\n" + v + "\n";
    return out;
}

const Primitive& find(const FlatDrawing& f, const std::string& id) {
    for (const auto& p : f.primitives)
        if (p.primitive.source_id == id) return p.primitive;
    FAIL("missing primitive " << id);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("single line fixture") {
    const auto doc = parse_document(fixture("one_line.dxf"));
    REQUIRE(doc.entities.size() == 1);
    const auto& line = std::get<LineEntity>(doc.entities[0]);
    CHECK(line.layer == "A-WALL");
    CHECK(line.handle == "1A");
    CHECK(line.end == Vec2{3000, 4000});
    bool has_layer = false;
    for (const auto& l : doc.layers) has_layer |= l.name == "A-WALL";
    CHECK(has_layer);
    CHECK(doc.unit_scale == 0.001);
    const auto flat = flatten_blocks(doc);
    REQUIRE(flat.primitives.size() == 1);
    CHECK(flat.primitives[0].primitive.source_id == "1A");
}

TEST_CASE("block fixture with two references") {
    const auto doc = parse_document(fixture("block_two_refs.dxf"));
    CHECK(doc.blocks.size() == 1);
    int refs = 0;
    for (const auto& e : doc.entities) refs += std::holds_alternative<BlockRef>(e);
    CHECK(refs == 2);

    const auto flat = flatten_blocks(doc);
    REQUIRE(flat.primitives.size() == 4);
    // members on layer 0 take the reference's layer
    for (const auto& p : flat.primitives) CHECK(p.layer == "A-DOOR");
    const auto& a = find(flat, "R1/L1");
    CHECK(a.p0 == Vec2{10000, 0});
    CHECK(a.p1 == Vec2{11000, 0});
    const auto& b = find(flat, "R2/L1");
    CHECK(b.p1.x == doctest::Approx(20000.0));
    CHECK(b.p1.y == doctest::Approx(6000.0));
    for (const auto& p : flat.primitives) {
        REQUIRE(p.provenance.size() == 1);
        CHECK(p.provenance[0].block_name == "DOORLEAF");
        CHECK(p.provenance[0].ref_id == p.primitive.source_id.substr(0, 2));
    }
    // same shape, different placement
    CHECK(primitive_length(find(flat, "R1/L2")) == doctest::Approx(primitive_length(find(flat, "R2/L2"))));
}

TEST_CASE("stream ending mid-pair") {
    try {
        parse_document(fixture("truncated.dxf"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 43);
    }
}

TEST_CASE("malformed values report their line") {
    const std::string text = pairs({{0, "SECTION"}, {2, "ENTITIES"}, {0, "LINE"}, {8, "A"}, {10, "abc"}});
    try {
        parse_document(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 10);
    }
    CHECK_THROWS_AS(parse_document(pairs({{0, "SECTION"}, {2, "ENTITIES"}, {0, "INSERT"}, {2, "NOPE"},
                                          {0, "ENDSEC"}, {0, "EOF"}})),
                    ParseError);
}

TEST_CASE("block placement") {
    DrawingDocument doc;
    doc.layers = {{"0", true}, {"A", true}};
    doc.blocks["B"] = BlockDef{"B", {}, {LineEntity{"L", "0", {0, 0}, {1, 0}}}};
    BlockRef r;
    r.block_name = "B";
    r.layer = "A";
    r.ref_id = "ref1";
    r.insert = {10, 0};
    doc.entities.push_back(r);
    const auto flat = flatten_blocks(doc);
    REQUIRE(flat.primitives.size() == 1);
    CHECK(flat.primitives[0].primitive.p0 == Vec2{10, 0});
    CHECK(flat.primitives[0].primitive.p1 == Vec2{11, 0});
    CHECK(flat.primitives[0].provenance[0] == ProvenanceLink{"B", "ref1"});
}

TEST_CASE("nested uniform scales compose") {
    DrawingDocument doc;
    doc.layers = {{"0", true}};
    doc.blocks["IN"] = BlockDef{"IN", {}, {LineEntity{"L", "0", {0, 0}, {1, 0}}}};
    BlockRef inner;
    inner.block_name = "IN";
    inner.layer = "0";
    inner.ref_id = "i";
    inner.scale_x = inner.scale_y = 3;
    doc.blocks["OUT"] = BlockDef{"OUT", {}, {inner}};
    BlockRef outer;
    outer.block_name = "OUT";
    outer.layer = "0";
    outer.ref_id = "o";
    outer.scale_x = outer.scale_y = 2;
    outer.rotation_deg = 30;
    doc.entities.push_back(outer);
    const auto flat = flatten_blocks(doc);
    REQUIRE(flat.primitives.size() == 1);
    CHECK(flat.primitives[0].primitive.source_id == "o/i/L");
    CHECK(primitive_length(flat.primitives[0].primitive) == doctest::Approx(6.0).epsilon(1e-14));
    REQUIRE(flat.primitives[0].provenance.size() == 2);
    CHECK(flat.primitives[0].outermost()->ref_id == "o");
}

TEST_CASE("reference cycles and non-conformal arcs") {
    DrawingDocument doc;
    doc.layers = {{"0", true}};
    BlockRef to_b;
    to_b.block_name = "B";
    to_b.ref_id = "x";
    to_b.layer = "0";
    BlockRef to_a = to_b;
    to_a.block_name = "A";
    doc.blocks["A"] = BlockDef{"A", {}, {to_b}};
    doc.blocks["B"] = BlockDef{"B", {}, {to_a}};
    doc.entities.push_back(to_a);
    CHECK_THROWS_AS(flatten_blocks(doc), CycleError);

    DrawingDocument d2;
    d2.layers = {{"0", true}};
    d2.blocks["C"] = BlockDef{"C", {}, {CircleEntity{"c", "0", {0, 0}, 1}}};
    BlockRef squash;
    squash.block_name = "C";
    squash.layer = "0";
    squash.ref_id = "s";
    squash.scale_x = 2;
    squash.scale_y = 1;
    d2.entities.push_back(squash);
    CHECK_THROWS_AS(flatten_blocks(d2), NonConformalOnCurve);
}

TEST_CASE("polyline segments and bulges") {
    const std::string text = pairs({{0, "SECTION"}, {2, "ENTITIES"},
                                    {0, "LWPOLYLINE"}, {5, "P"}, {8, "A"}, {70, "1"},
                                    {10, "0"}, {20, "0"}, {42, "1"},
                                    {10, "2"}, {20, "0"},
                                    {10, "2"}, {20, "2"},
                                    {0, "ENDSEC"}, {0, "EOF"}});
    const auto flat = flatten_blocks(parse_document(text));
    REQUIRE(flat.primitives.size() == 3);
    const auto& arc = find(flat, "P#0");
    // bulge 1 is a half circle over the chord (0,0)-(2,0)
    CHECK(arc.kind == geometry::PrimitiveKind::Arc);
    CHECK(arc.radius == doctest::Approx(1.0));
    CHECK(primitive_length(arc) == doctest::Approx(std::numbers::pi));
    CHECK(find(flat, "P#1").kind == geometry::PrimitiveKind::PolySeg);
    CHECK(find(flat, "P#2").p1 == Vec2{0, 0});  // closing segment
}

TEST_CASE("array inserts expand into single placements") {
    const std::string text = pairs({{0, "SECTION"}, {2, "BLOCKS"},
                                    {0, "BLOCK"}, {2, "B"}, {10, "0"}, {20, "0"},
                                    {0, "LINE"}, {5, "L"}, {8, "0"}, {10, "0"}, {20, "0"}, {11, "1"}, {21, "0"},
                                    {0, "ENDBLK"}, {0, "ENDSEC"},
                                    {0, "SECTION"}, {2, "ENTITIES"},
                                    {0, "INSERT"}, {5, "R"}, {8, "A"}, {2, "B"}, {10, "0"}, {20, "0"},
                                    {70, "2"}, {71, "2"}, {44, "5"}, {45, "7"},
                                    {0, "ENDSEC"}, {0, "EOF"}});
    const auto doc = parse_document(text);
    CHECK(doc.entities.size() == 4);
    const auto flat = flatten_blocks(doc);
    CHECK(find(flat, "R@1.1/L").p0 == Vec2{5, 7});
}

TEST_CASE("unit handling") {
    CHECK(unit_scale_for_insunits(4) == 0.001);
    CHECK(unit_scale_for_insunits(6) == 1.0);
    CHECK_FALSE(unit_scale_for_insunits(0).has_value());
    const std::string meters = pairs({{0, "SECTION"}, {2, "HEADER"}, {9, "$INSUNITS"}, {70, "6"},
                                      {0, "ENDSEC"}, {0, "EOF"}});
    CHECK(parse_document(meters).unit_scale == 1.0);
    const std::string none = pairs({{0, "EOF"}});
    CHECK(parse_document(none).unit_scale == 0.001);
    ParseOptions opt;
    opt.default_unit_scale = 0.01;
    CHECK(parse_document(none, opt).unit_scale == 0.01);
    opt.unit_scale_override = 2.0;
    CHECK(parse_document(meters, opt).unit_scale == 2.0);
}

TEST_CASE("unsupported entities are counted, not fatal") {
    const std::string text = pairs({{0, "SECTION"}, {2, "ENTITIES"},
                                    {0, "SPLINE"}, {8, "A"},
                                    {0, "LINE"}, {8, "A"}, {10, "0"}, {20, "0"}, {11, "0"}, {21, "0"},
                                    {0, "CIRCLE"}, {8, "A"}, {10, "0"}, {20, "0"}, {40, "5"},
                                    {0, "ENDSEC"}, {0, "EOF"}});
    ParseReport report;
    const auto doc = parse_document(text, {}, &report);
    CHECK(doc.entities.size() == 1);
    CHECK(report.skipped_total() == 2);
    CHECK(report.skipped.at("SPLINE") == 1);
}

TEST_CASE("text scrubbing") {
    DrawingDocument doc;
    doc.layers = {{"A-ANNO-TEXT", true}};
    doc.entities.push_back(TextEntity{"t1", "A-ANNO-TEXT", {5, 6}, "Project X", false});
    doc.entities.push_back(LineEntity{"l1", "A-ANNO-TEXT", {0, 0}, {1, 0}});

    ScrubReport report;
    const auto blank = scrub_text(doc, ScrubPolicy::Blank, &report);
    REQUIRE(blank.entities.size() == 2);
    const auto& t = std::get<TextEntity>(blank.entities[0]);
    CHECK(t.content.empty());
    CHECK(t.anchor == Vec2{5, 6});
    CHECK(report.affected == 1);

    const auto dropped = scrub_text(doc, ScrubPolicy::Drop, &report);
    CHECK(dropped.entities.size() == 1);
    CHECK(std::holds_alternative<LineEntity>(dropped.entities[0]));

    DrawingDocument plain;
    plain.entities.push_back(LineEntity{"l1", "A", {0, 0}, {1, 0}});
    CHECK(scrub_text(plain, ScrubPolicy::Drop, &report) == plain);
    CHECK(report.affected == 0);
}

TEST_CASE("serialize is an inverse of parse") {
    for (const char* name : {"one_line.dxf", "block_two_refs.dxf"}) {
        const auto doc = parse_document(fixture(name));
        CHECK(parse_document(serialize_document(doc)) == doc);
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        synthgen::GenSpec spec;
        spec.seed = seed;
        spec.unmatched_layers = static_cast<int>(seed % 3);
        const auto doc = synthgen::generate_drawing(spec).document;
        const std::string text = serialize_document(doc);
        CHECK(parse_document(text) == doc);
        CHECK(serialize_document(parse_document(text)) == text);
    }
}

TEST_CASE("flattened ids are unique") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        synthgen::GenSpec spec;
        spec.seed = seed;
        const auto flat = flatten_blocks(synthgen::generate_drawing(spec).document);
        std::set<std::string> ids;
        for (const auto& p : flat.primitives) CHECK(ids.insert(p.primitive.source_id).second);
    }
}
