#include "plancad/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"

#include "plancad/errors.hpp"

namespace plancad::synthgen {

namespace {

using geometry::Vec2;
using ingest::ArcEntity;
using ingest::BlockDef;
using ingest::BlockRef;
using ingest::CircleEntity;
using ingest::DrawingDocument;
using ingest::LineEntity;
using ingest::PolylineEntity;
using ingest::TextEntity;
using screening::ClassId;
using screening::kUnlabeled;
using annotator::InstanceId;

constexpr double kMm = 1000.0;  // drawing units per meter
constexpr double kSlotM = 2.0;

PolylineEntity rectangle(std::string handle, std::string layer, double x0, double y0, double x1, double y1) {
    PolylineEntity p;
    p.handle = std::move(handle);
    p.layer = std::move(layer);
    p.vertices = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    p.bulges.assign(4, 0.0);
    p.closed = true;
    return p;
}

LineEntity line(std::string handle, std::string layer, Vec2 a, Vec2 b) {
    return {std::move(handle), std::move(layer), a, b};
}

// Glyphs are centered on the block base point (0, 0); members sit on layer 0
// and inherit the insert's layer.
std::map<std::string, BlockDef> symbol_blocks() {
    const std::string z = ingest::kPlaceholderLayer;
    std::map<std::string, BlockDef> blocks;

    BlockDef door{"DOOR", {0, 0}, {}};
    door.entities.emplace_back(line("DL1", z, {-450, -450}, {-450, 450}));
    door.entities.emplace_back(ArcEntity{"DA1", z, {-450, -450}, 900.0, 0.0, 90.0});
    door.entities.emplace_back(line("DL2", z, {-450, -450}, {450, -450}));
    blocks.emplace(door.name, std::move(door));

    BlockDef window{"WINDOW", {0, 0}, {}};
    for (int k = 0; k < 3; ++k) {
        const double y = -100.0 + 100.0 * k;
        window.entities.emplace_back(line("WL" + std::to_string(k + 1), z, {-600, y}, {600, y}));
    }
    blocks.emplace(window.name, std::move(window));

    BlockDef stair{"STAIR", {0, 0}, {}};
    stair.entities.emplace_back(rectangle("SO1", z, -500, -700, 500, 700));
    for (int k = 1; k < 6; ++k) {
        const double y = -700.0 + 1400.0 * k / 6.0;
        stair.entities.emplace_back(line("ST" + std::to_string(k), z, {-500, y}, {500, y}));
    }
    blocks.emplace(stair.name, std::move(stair));

    BlockDef column{"COLUMN", {0, 0}, {}};
    column.entities.emplace_back(rectangle("CO1", z, -200, -200, 200, 200));
    column.entities.emplace_back(line("CX1", z, {-200, -200}, {200, 200}));
    blocks.emplace(column.name, std::move(column));

    BlockDef chair{"CHAIR", {0, 0}, {}};
    chair.entities.emplace_back(CircleEntity{"HC1", z, {0, 0}, 220.0});
    chair.entities.emplace_back(ArcEntity{"HA1", z, {0, 0}, 280.0, 200.0, 340.0});
    blocks.emplace(chair.name, std::move(chair));

    BlockDef desk{"DESK", {0, 0}, {}};
    desk.entities.emplace_back(rectangle("KT1", z, -600, -100, 600, 500));
    BlockRef seat;
    seat.block_name = "CHAIR";
    seat.layer = z;
    seat.ref_id = "KC1";
    seat.insert = {0, -400};
    desk.entities.emplace_back(seat);
    blocks.emplace(desk.name, std::move(desk));
    return blocks;
}

struct SymbolKind {
    const char* block;
    const char* layer;
    const char* prefix;
};

// Flattened ids of everything a reference to `block` places, derived from the
// construction rather than by flattening.
std::vector<std::string> member_ids(const std::map<std::string, BlockDef>& blocks, const std::string& block,
                                    const std::string& prefix) {
    std::vector<std::string> out;
    for (const auto& e : blocks.at(block).entities) {
        if (const auto* poly = std::get_if<PolylineEntity>(&e)) {
            const std::size_t segments = poly->closed ? poly->vertices.size() : poly->vertices.size() - 1;
            for (std::size_t k = 0; k < segments; ++k) out.push_back(prefix + poly->handle + "#" + std::to_string(k));
        } else if (const auto* ref = std::get_if<BlockRef>(&e)) {
            for (auto& id : member_ids(blocks, ref->block_name, prefix + ref->ref_id + "/")) out.push_back(std::move(id));
        } else {
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (!std::is_same_v<T, TextEntity> && !std::is_same_v<T, BlockRef>) {
                        out.push_back(prefix + v.handle);
                    }
                },
                e);
        }
    }
    return out;
}

void check_spec(const GenSpec& s) {
    if (!(s.width_m > 0.0) || !(s.height_m > 0.0) || !std::isfinite(s.width_m) || !std::isfinite(s.height_m)) {
        throw SpecError("area must be positive");
    }
    if (s.doors < 0 || s.windows < 0 || s.stairs < 0 || s.columns < 0 || s.furniture < 0 ||
        s.unmatched_layers < 0 || s.texts < 0) {
        throw SpecError("counts must be nonnegative");
    }
    if (s.wall_spacing_m < 0.0 || !std::isfinite(s.wall_spacing_m)) throw SpecError("wall spacing must be >= 0");
}

}  // namespace

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

GenSpec spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("spec is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw SpecError("spec must be a JSON object");
    GenSpec s;
    static const std::set<std::string> known = {"seed",   "width_m",   "height_m", "doors",
                                                "windows", "stairs",   "columns",  "furniture",
                                                "wall_spacing_m", "unmatched_layers", "texts"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw SpecError("unknown spec field '" + key + "'");
    }
    try {
        s.seed = j.value("seed", s.seed);
        s.width_m = j.value("width_m", s.width_m);
        s.height_m = j.value("height_m", s.height_m);
        s.doors = j.value("doors", s.doors);
        s.windows = j.value("windows", s.windows);
        s.stairs = j.value("stairs", s.stairs);
        s.columns = j.value("columns", s.columns);
        s.furniture = j.value("furniture", s.furniture);
        s.wall_spacing_m = j.value("wall_spacing_m", s.wall_spacing_m);
        s.unmatched_layers = j.value("unmatched_layers", s.unmatched_layers);
        s.texts = j.value("texts", s.texts);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("bad spec field: ") + e.what());
    }
    check_spec(s);
    return s;
}

std::string spec_to_json(const GenSpec& s) {
    nlohmann::ordered_json j;
    j["seed"] = s.seed;
    j["width_m"] = s.width_m;
    j["height_m"] = s.height_m;
    j["doors"] = s.doors;
    j["windows"] = s.windows;
    j["stairs"] = s.stairs;
    j["columns"] = s.columns;
    j["furniture"] = s.furniture;
    j["wall_spacing_m"] = s.wall_spacing_m;
    j["unmatched_layers"] = s.unmatched_layers;
    j["texts"] = s.texts;
    return j.dump(2) + "\n";
}

Generated generate_drawing(const GenSpec& spec) {
    check_spec(spec);
    const auto& table = screening::default_reference_table();
    const auto& catalog = table.catalog;
    Rng rng(spec.seed);

    const double w = spec.width_m * kMm;
    const double h = spec.height_m * kMm;
    const auto slot_cols = static_cast<std::size_t>(std::floor(spec.width_m / kSlotM));
    const auto slot_rows = static_cast<std::size_t>(std::floor(spec.height_m / kSlotM));
    const std::size_t symbols = static_cast<std::size_t>(spec.doors) + spec.windows + spec.stairs + spec.columns +
                                spec.furniture;
    if (symbols > slot_cols * slot_rows) {
        throw SpecError(std::to_string(symbols) + " symbols do not fit in " + std::to_string(slot_cols * slot_rows) +
                        " slots");
    }

    DrawingDocument doc;
    doc.insunits = 4;
    doc.unit_scale = 0.001;
    doc.blocks = symbol_blocks();
    std::vector<std::string> layers = {ingest::kPlaceholderLayer, "A-WALL-CONC", "A-WALL-BLOK"};
    GroundTruth truth;
    const ClassId wall = *catalog.find("wall");

    // Outer boundary and the interior wall grid.
    doc.entities.emplace_back(rectangle("B1", "A-WALL-CONC", 0, 0, w, h));
    for (int k = 0; k < 4; ++k) truth.labels["B1#" + std::to_string(k)] = {wall, 0};
    int wall_no = 0;
    if (spec.wall_spacing_m > 0.0) {
        const double step = spec.wall_spacing_m * kMm;
        for (double x = step; x < w - 1e-6; x += step) {
            const std::string id = "W" + std::to_string(++wall_no);
            doc.entities.emplace_back(line(id, "A-WALL-BLOK", {x, 0}, {x, h}));
            truth.labels[id] = {wall, 0};
        }
        for (double y = step; y < h - 1e-6; y += step) {
            const std::string id = "W" + std::to_string(++wall_no);
            doc.entities.emplace_back(line(id, "A-WALL-BLOK", {0, y}, {w, y}));
            truth.labels[id] = {wall, 0};
        }
    }

    std::vector<std::size_t> slots(slot_cols * slot_rows);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    rng.shuffle(slots);
    std::size_t next_slot = 0;

    const std::vector<std::pair<SymbolKind, int>> kinds = {
        {{"DOOR", "A-DOOR", "D"}, spec.doors},
        {{"WINDOW", "A-GLAZ", "N"}, spec.windows},
        {{"STAIR", "A-STRS-TREA", "S"}, spec.stairs},
        {{"COLUMN", "S-COLS", "C"}, spec.columns},
        {{"DESK", "A-FURN", "F"}, spec.furniture},
    };
    InstanceId instance = 0;
    for (const auto& [kind, count] : kinds) {
        if (count > 0) layers.push_back(kind.layer);
        const ClassId cls = *screening::match_layer(table, kind.layer);
        for (int k = 1; k <= count; ++k) {
            const std::size_t slot = slots[next_slot++];
            BlockRef ref;
            ref.block_name = kind.block;
            ref.layer = kind.layer;
            ref.ref_id = std::string(kind.prefix) + std::to_string(k);
            ref.insert = {(static_cast<double>(slot % slot_cols) + 0.5) * kSlotM * kMm,
                          (static_cast<double>(slot / slot_cols) + 0.5) * kSlotM * kMm};
            ref.rotation_deg = 90.0 * static_cast<double>(rng.index(4));
            if (std::string(kind.block) == "DOOR" && rng.index(2) == 1) ref.scale_x = -1.0;
            doc.entities.emplace_back(ref);
            ++instance;
            for (const auto& id : member_ids(doc.blocks, kind.block, ref.ref_id + "/")) {
                truth.labels[id] = {cls, instance};
            }
        }
    }

    for (int k = 1; k <= spec.unmatched_layers; ++k) {
        const std::string layer = "Z-MISC-" + std::to_string(k);
        layers.push_back(layer);
        const std::string id = "U" + std::to_string(k);
        const double y = h * (rng.uniform() * 0.8 + 0.1);
        doc.entities.emplace_back(line(id, layer, {w * 0.1, y}, {w * 0.9, y}));
        truth.labels[id] = {kUnlabeled, 0};
    }
    if (spec.texts > 0) layers.push_back("A-ANNO-TEXT");
    for (int k = 1; k <= spec.texts; ++k) {
        TextEntity t;
        t.handle = "T" + std::to_string(k);
        t.layer = "A-ANNO-TEXT";
        t.anchor = {w * rng.uniform(), h * rng.uniform()};
        t.content = "Room " + std::to_string(k);
        doc.entities.emplace_back(std::move(t));
    }
    for (const auto& name : layers) doc.layers.push_back({name, true});

    // Normalize through the reader so the document equals its parsed form.
    Generated out;
    out.document = ingest::parse_document(ingest::serialize_document(doc));
    truth.instances = metrics::instances_from_labels(truth.labels, catalog);
    out.truth = std::move(truth);
    return out;
}

GroundTruth perturb_labels(const GroundTruth& truth, double rate, std::uint64_t seed,
                           const screening::ClassCatalog& catalog) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw SpecError("perturbation rate must lie in [0, 1]");
    GroundTruth out = truth;
    std::vector<std::string> ids;
    ids.reserve(truth.labels.size());
    for (const auto& [id, _] : truth.labels) ids.push_back(id);
    const auto changes = static_cast<std::size_t>(std::floor(rate * static_cast<double>(ids.size()) + 0.5));
    if (changes == 0 || catalog.size() < 2) return out;
    Rng rng(seed);
    rng.shuffle(ids);
    for (std::size_t k = 0; k < std::min(changes, ids.size()); ++k) {
        auto& label = out.labels.at(ids[k]);
        // Uniform over the catalog classes other than the current one.
        std::vector<ClassId> choices;
        for (ClassId c : catalog.ids()) {
            if (c != label.cls) choices.push_back(c);
        }
        label = {choices[rng.index(choices.size())], 0};
    }
    out.instances = metrics::instances_from_labels(out.labels, catalog);
    return out;
}

metrics::LabelMap canonical_labels(const metrics::LabelMap& labels) {
    // Map order visits the smallest member of each instance first.
    std::map<std::pair<ClassId, InstanceId>, InstanceId> renumber;
    std::map<ClassId, InstanceId> next;
    metrics::LabelMap out;
    for (const auto& [id, label] : labels) {
        auto copy = label;
        if (label.instance > 0) {
            auto [it, inserted] = renumber.try_emplace({label.cls, label.instance}, 0);
            if (inserted) it->second = ++next[label.cls];
            copy.instance = it->second;
        }
        out.emplace(id, copy);
    }
    return out;
}

annotator::AnnotatedDrawing with_labels(std::shared_ptr<const ingest::FlatDrawing> drawing,
                                        const screening::ClassCatalog& catalog, const metrics::LabelMap& labels) {
    screening::ReferenceTable empty;
    empty.catalog = catalog;
    auto ann = annotator::assign_semantics(std::move(drawing), empty);
    ann.stage = annotator::Stage::Instance;
    ann.unmatched_layers.clear();
    for (std::size_t i = 0; i < ann.size(); ++i) {
        const auto& id = ann.drawing->primitives[i].primitive.source_id;
        auto it = labels.find(id);
        if (it == labels.end()) throw CoverageError("no label for primitive '" + id + "'");
        ann.labels[i] = it->second;
        if (it->second.instance > 0) {
            ann.live_instances.insert(it->second.instance);
            ann.next_instance = std::max(ann.next_instance, it->second.instance + 1);
        }
    }
    ann.flags = annotator::check_compliance(ann);
    return ann;
}

}  // namespace plancad::synthgen
