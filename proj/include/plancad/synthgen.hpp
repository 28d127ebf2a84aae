#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "plancad/annotator.hpp"
#include "plancad/ingest.hpp"
#include "plancad/metrics.hpp"

// Miniature standardized drawings with exact ground truth. Coordinates are in
// millimeters ($INSUNITS 4).
namespace plancad::synthgen {

// Seeded generator: std::mt19937_64 raw outputs with a fixed mapping to
// doubles and indices, so results do not depend on the standard library's
// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // (x >> 11) * 2^-53, in [0, 1).
    double uniform();
    // floor(uniform() * n), n > 0.
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 engine_;
};

struct GenSpec {
    std::uint64_t seed = 1;
    double width_m = 28.0;
    double height_m = 28.0;
    int doors = 4;
    int windows = 4;
    int stairs = 1;
    int columns = 4;
    int furniture = 3;
    // Interior wall lines every this many meters in both directions; 0 leaves
    // only the outer boundary.
    double wall_spacing_m = 7.0;
    int unmatched_layers = 0;
    int texts = 2;
};

// Reads a JSON object with any of the GenSpec fields ("seed", "width_m",
// ...); absent keys keep their defaults. Throws SpecError.
GenSpec spec_from_json(const std::string& text);
std::string spec_to_json(const GenSpec& spec);

struct GroundTruth {
    metrics::LabelMap labels;  // flattened sourceId -> label
    std::vector<metrics::SymbolInstance> instances;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Generated {
    ingest::DrawingDocument document;
    GroundTruth truth;
};

// Symbols sit on a 2 m slot grid; more symbols than slots is a SpecError.
// The catalog is the bundled reference table's.
Generated generate_drawing(const GenSpec& spec);

// round-half-up(rate * N) primitives picked by a seeded shuffle get a
// uniformly chosen different class and lose their instance id.
GroundTruth perturb_labels(const GroundTruth& truth, double rate, std::uint64_t seed,
                           const screening::ClassCatalog& catalog);

// Renumbers instance ids 1..k in order of each instance's smallest member id,
// per class; labels without an instance are unchanged.
metrics::LabelMap canonical_labels(const metrics::LabelMap& labels);

// Annotation of the flattened drawing carrying the given labels (the ground
// truth as an AnnotatedDrawing, e.g. for chunking and export).
annotator::AnnotatedDrawing with_labels(std::shared_ptr<const ingest::FlatDrawing> drawing,
                                        const screening::ClassCatalog& catalog, const metrics::LabelMap& labels);

}  // namespace plancad::synthgen
