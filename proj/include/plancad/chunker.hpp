#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plancad/annotator.hpp"
#include "plancad/geometry.hpp"

namespace plancad::chunker {

using annotator::PanopticLabel;
using geometry::Primitive;
using geometry::Vec2;
using screening::ClassCatalog;

inline constexpr double kDefaultChunkSizeM = 14.0;
inline constexpr int kDefaultRenderSize = 700;
inline constexpr const char* kChunkSchema = "plancad-chunk/1";

struct ChunkId {
    std::string drawing_id;
    int col = 0;
    int row = 0;

    // "<drawing>_c<col>_r<row>", also the chunk file stem.
    std::string str() const;
    friend bool operator==(const ChunkId&, const ChunkId&) = default;
};

struct ChunkPrimitive {
    // Chunk-local meters; source_id is the original flattened id.
    Primitive primitive;
    PanopticLabel label;
    // Confidence attached to predicted labels.
    std::optional<double> score;

    const std::string& source_id() const { return primitive.source_id; }
    friend bool operator==(const ChunkPrimitive&, const ChunkPrimitive&) = default;
};

struct Chunk {
    ChunkId id;
    Vec2 origin;  // world meters of the chunk min corner
    double size_m = kDefaultChunkSizeM;
    ClassCatalog catalog;
    std::vector<ChunkPrimitive> primitives;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

// Labels exact, geometry and origin within tol.
bool approx_equal(const Chunk& a, const Chunk& b, double tol = geometry::kTolerance);

// Tiles the drawing on a grid anchored at its bounding-box min corner. A
// primitive joins every chunk whose closed window it touches; it is never cut.
// Chunks without primitives are omitted; primitives within a chunk are ordered
// by source id. Throws NoExtent for an empty drawing.
std::vector<Chunk> chunk_drawing(const annotator::AnnotatedDrawing& ann, const std::string& drawing_id,
                                 double size_m = kDefaultChunkSizeM);

// Canonical chunk markup (docs/chunk_format.md).
std::string export_chunk(const Chunk& chunk);
// Throws FormatError.
Chunk import_chunk(std::string_view text);

struct ImageGrid {
    int width = 0;
    int height = 0;
    int channels = 1;
    // Row-major [row][col][channel]; row 0 is the chunk's y = 0 edge.
    std::vector<float> values;

    float at(int col, int row, int channel = 0) const {
        return values[(static_cast<std::size_t>(row) * width + col) * channels + channel];
    }
    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

// Binary occupancy raster. Each primitive is sampled every quarter pixel and a
// pixel lights when a sample falls within strokePx/2 of its center in the
// max-norm (half-open: [center - r, center + r)).
ImageGrid render_chunk(const Chunk& chunk, int width = kDefaultRenderSize,
                       int height = kDefaultRenderSize, double stroke_px = 1.0);

// Plain-text graymap (P2), top image row = highest y.
std::string to_pgm(const ImageGrid& grid);
// "plancad-grid/1 <height> <width> <channels>\n" followed by little-endian
// float32 values in row-major order.
std::string to_raw_grid(const ImageGrid& grid);

}  // namespace plancad::chunker
