#include "doctest.h"
#include "plancad/errors.hpp"
#include "plancad/screening.hpp"
#include "plancad/synthgen.hpp"

using namespace plancad;
using namespace plancad::screening;

namespace {

const char* kSmallTable =
    "@classes\n"
    "door\tthing\n"
    "wall\tstuff\n"
    "@end\n"
    "A-DOOR*\tdoor\tThe internal steel frame supporting the door.\n"
    "A-WALL|A-WALL-*\twall\tWalls\n";

// `matched` layers named like walls, the rest unmatched; one line each.
ingest::FlatDrawing layered(int total, int matched) {
    ingest::FlatDrawing d;
    for (int i = 0; i < total; ++i) {
        const std::string name = i < matched ? "A-WALL-" + std::to_string(i) : "Q-ODD-" + std::to_string(i);
        d.layers.push_back({name, true});
        d.primitives.push_back({geometry::Primitive::line({0, double(i)}, {1, double(i)}, "L" + std::to_string(i)),
                                name, {}});
    }
    return d;
}

}  // namespace

TEST_CASE("loading a table") {
    const auto t = load_reference_table(kSmallTable);
    CHECK(t.rows.size() == 2);
    CHECK(t.catalog.size() == 2);
    CHECK(match_layer(t, "A-DOOR-FRAM") == t.catalog.find("door"));
    CHECK(match_layer(t, "a-door-fram") == t.catalog.find("door"));
    CHECK(t.rows[0].description == "The internal steel frame supporting the door.");
}

TEST_CASE("table errors") {
    CHECK_THROWS_AS(load_reference_table("@classes\ndoor\tthing\n@end\nA-X\tFnord\tbad\n"), TableError);
    try {
        load_reference_table("@classes\ndoor\tthing\n@end\nA-X\tFnord\tbad\n");
    } catch (const TableError& e) {
        CHECK(e.row() == 4);
        CHECK(std::string(e.what()).find("Fnord") != std::string::npos);
    }
    CHECK_THROWS_AS(load_reference_table("@classes\ndoor\tbig\n@end\n"), TableError);
    CHECK_THROWS_AS(load_reference_table("@classes\ndoor\tthing\n"), TableError);
    CHECK_THROWS_AS(load_reference_table("@classes\ndoor\tthing\n@end\nA-X\tdoor\n"), TableError);
    CHECK_THROWS_AS(load_reference_table("@classes\ndoor\tthing\n@end\nA-X\tdoor\ta\nA-X\tdoor\tb\n"), TableError);
    CHECK_THROWS_AS(load_reference_table("@classes\ndoor\tthing\ndoor\tstuff\n@end\n"), TableError);
}

TEST_CASE("empty table matches nothing") {
    const auto t = load_reference_table("");
    CHECK(t.rows.empty());
    CHECK_FALSE(match_layer(t, "A-DOOR").has_value());
}

TEST_CASE("bundled table") {
    const auto& t = default_reference_table();
    const auto& c = t.catalog;
    CHECK(match_layer(t, "A-DOOR") == c.find("door"));
    CHECK(match_layer(t, "A-WALL-CONC") == c.find("wall"));
    CHECK_FALSE(match_layer(t, "X-UNKNOWN-99").has_value());
    CHECK(match_layer(t, "A-ANNO-DIMS") == c.find("dimension"));
    CHECK(c.is_thing(*c.find("door")));
    CHECK_FALSE(c.is_thing(*c.find("wall")));
    CHECK(c.find("unlabeled") == kUnlabeled);
    CHECK(c.name(kUnlabeled) == "unlabeled");
}

TEST_CASE("first matching row wins") {
    const auto t = load_reference_table("@classes\na\tthing\nb\tstuff\n@end\nX-*\ta\tfirst\nX-Y\tb\tsecond\n");
    CHECK(match_layer(t, "X-Y") == t.catalog.find("a"));
}

TEST_CASE("glob patterns") {
    LayerPattern p("A-?OOR|B-*-Z");
    CHECK(p.matches("A-DOOR"));
    CHECK(p.matches("a-poor"));
    CHECK_FALSE(p.matches("A-DOORS"));
    CHECK(p.matches("B--Z"));
    CHECK(p.matches("B-1-2-Z"));
    CHECK_FALSE(p.matches("B-1-2-Z1"));
    CHECK_THROWS_AS(LayerPattern(""), std::invalid_argument);
    CHECK_THROWS_AS(LayerPattern("A||B"), std::invalid_argument);
}

TEST_CASE("deviation boundary") {
    const auto& t = default_reference_table();
    const auto all = screen_drawing(t, layered(20, 20));
    CHECK(all.deviation == 0.0);
    CHECK(all.accepted);

    const auto one_off = screen_drawing(t, layered(20, 19));
    CHECK(one_off.deviation == 0.05);
    CHECK(one_off.accepted);
    CHECK(one_off.unmatched == std::vector<std::string>{"Q-ODD-19"});

    const auto two_off = screen_drawing(t, layered(20, 18));
    CHECK(two_off.deviation == doctest::Approx(0.10).epsilon(1e-15));
    CHECK_FALSE(two_off.accepted);
    CHECK(two_off.total_layers == 20);
    CHECK(two_off.matched_layers == 18);
}

TEST_CASE("layers without primitives do not count") {
    auto d = layered(4, 4);
    d.layers.push_back({"EMPTY-LAYER", true});
    const auto r = screen_drawing(default_reference_table(), d);
    CHECK(r.total_layers == 4);
    CHECK(r.accepted);
    CHECK_THROWS_AS(screen_drawing(default_reference_table(), ingest::FlatDrawing{}), EmptyDrawing);
}

TEST_CASE("primitive-weighted deviation is analysis only") {
    auto d = layered(2, 1);
    for (int i = 0; i < 8; ++i) d.primitives.push_back(d.primitives[0]);
    const auto by_layer = screen_drawing(default_reference_table(), d);
    const auto by_prim = screen_drawing(default_reference_table(), d, 0.05, DeviationMode::Primitives);
    CHECK(by_layer.deviation == 0.5);
    CHECK(by_prim.deviation == doctest::Approx(0.1));
}

TEST_CASE("generated drawings screen clean") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        synthgen::GenSpec spec;
        spec.seed = seed;
        const auto flat = ingest::flatten_blocks(synthgen::generate_drawing(spec).document);
        const auto r = screen_drawing(default_reference_table(), flat);
        CHECK(r.deviation == 0.0);
        CHECK(r.accepted);
    }
}
