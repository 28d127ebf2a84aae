#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "plancad/geometry.hpp"

// Reader for the ASCII group-code/value interchange subset documented in
// docs/interchange_subset.md. Raw entities keep the file's native values
// (degrees, bulges, insertion parameters) so that serialize_document is an
// exact inverse of parse_document on the supported subset.
namespace plancad::ingest {

using geometry::Affine;
using geometry::Primitive;
using geometry::Vec2;

inline constexpr const char* kPlaceholderLayer = "0";

struct LayerRecord {
    std::string name;
    bool visible = true;

    friend bool operator==(const LayerRecord&, const LayerRecord&) = default;
};

struct LineEntity {
    std::string handle;
    std::string layer;
    Vec2 start;
    Vec2 end;

    friend bool operator==(const LineEntity&, const LineEntity&) = default;
};

struct ArcEntity {
    std::string handle;
    std::string layer;
    Vec2 center;
    double radius = 0.0;
    double start_deg = 0.0;
    double end_deg = 0.0;

    friend bool operator==(const ArcEntity&, const ArcEntity&) = default;
};

struct CircleEntity {
    std::string handle;
    std::string layer;
    Vec2 center;
    double radius = 0.0;

    friend bool operator==(const CircleEntity&, const CircleEntity&) = default;
};

struct PolylineEntity {
    std::string handle;
    std::string layer;
    std::vector<Vec2> vertices;
    // bulges[i] describes the segment leaving vertices[i]; 0 is straight.
    std::vector<double> bulges;
    bool closed = false;

    friend bool operator==(const PolylineEntity&, const PolylineEntity&) = default;
};

// A placed block. Array inserts are expanded at parse time, so every BlockRef
// is a single placement.
struct BlockRef {
    std::string block_name;
    std::string layer;
    std::string ref_id;
    Vec2 insert;
    double scale_x = 1.0;
    double scale_y = 1.0;
    double rotation_deg = 0.0;

    // insert * rotate * scale * translate(-base).
    Affine placement(Vec2 block_base = {}) const;

    friend bool operator==(const BlockRef&, const BlockRef&) = default;
};

struct TextEntity {
    std::string handle;
    std::string layer;
    Vec2 anchor;
    std::string content;
    bool multiline = false;

    friend bool operator==(const TextEntity&, const TextEntity&) = default;
};

using Entity =
    std::variant<LineEntity, ArcEntity, CircleEntity, PolylineEntity, BlockRef, TextEntity>;

const std::string& entity_layer(const Entity& e);

// Geometry carried by a primitive-bearing entity, ids taken from its handle
// (polyline segments get "<handle>#<k>"). Empty for BlockRef and TextEntity.
std::vector<Primitive> entity_primitives(const Entity& e);

struct BlockDef {
    std::string name;
    Vec2 base;
    std::vector<Entity> entities;

    friend bool operator==(const BlockDef&, const BlockDef&) = default;
};

struct DrawingDocument {
    std::vector<LayerRecord> layers;
    std::map<std::string, BlockDef> blocks;
    std::vector<Entity> entities;
    double unit_scale = 0.001;
    // Value of the header units variable when the source declared one.
    std::optional<int> insunits;

    friend bool operator==(const DrawingDocument&, const DrawingDocument&) = default;
};

struct ParseOptions {
    // Used when the header declares no units (or unitless).
    double default_unit_scale = 0.001;
    // When set, wins over anything the header says.
    std::optional<double> unit_scale_override;
};

struct ParseReport {
    std::size_t entities_read = 0;
    // Entity type name -> number skipped (unsupported kinds, degenerate geometry).
    std::map<std::string, std::size_t> skipped;

    std::size_t skipped_total() const;
};

// Throws ParseError(line, reason).
DrawingDocument parse_document(std::string_view source, const ParseOptions& options = {},
                               ParseReport* report = nullptr);

// Emits the supported subset; parse_document(serialize_document(d)) == d for
// any document produced by parse_document.
std::string serialize_document(const DrawingDocument& doc);

// Meters per drawing unit for a header units code, nullopt when unitless or
// unknown.
std::optional<double> unit_scale_for_insunits(int code);

struct ProvenanceLink {
    std::string block_name;
    std::string ref_id;

    friend bool operator==(const ProvenanceLink&, const ProvenanceLink&) = default;
};

struct PlacedPrimitive {
    Primitive primitive;
    std::string layer;
    // Outermost reference first; empty for top-level entities.
    std::vector<ProvenanceLink> provenance;

    const ProvenanceLink* outermost() const {
        return provenance.empty() ? nullptr : &provenance.front();
    }

    friend bool operator==(const PlacedPrimitive&, const PlacedPrimitive&) = default;
};

struct FlatDrawing {
    std::vector<PlacedPrimitive> primitives;
    std::vector<LayerRecord> layers;
    double unit_scale = 0.001;

    friend bool operator==(const FlatDrawing&, const FlatDrawing&) = default;
};

// Expands every block reference recursively. Flattened ids are the refId
// chain joined by '/' followed by the member id, e.g. "R7/R2/L3#1".
// Throws CycleError or NonConformalOnCurve.
FlatDrawing flatten_blocks(const DrawingDocument& doc);

enum class ScrubPolicy { Blank, Drop };

struct ScrubReport {
    std::size_t affected = 0;
};

DrawingDocument scrub_text(const DrawingDocument& doc, ScrubPolicy policy,
                           ScrubReport* report = nullptr);

}  // namespace plancad::ingest
