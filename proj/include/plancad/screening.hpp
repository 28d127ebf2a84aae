#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plancad/ingest.hpp"

namespace plancad::screening {

using ClassId = int;
// Reserved id for primitives no table row claims.
inline constexpr ClassId kUnlabeled = 0;

struct ClassInfo {
    std::string name;
    bool is_thing = false;

    friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

// Ordered class catalog. Class ids are 1-based positions; 0 is Unlabeled.
class ClassCatalog {
public:
    ClassCatalog() = default;
    explicit ClassCatalog(std::vector<ClassInfo> classes);

    std::size_t size() const { return classes_.size(); }
    bool empty() const { return classes_.empty(); }
    bool contains(ClassId id) const { return id >= 1 && id <= static_cast<ClassId>(classes_.size()); }
    const ClassInfo& info(ClassId id) const { return classes_.at(static_cast<std::size_t>(id - 1)); }
    // "unlabeled" for kUnlabeled.
    std::string name(ClassId id) const;
    bool is_thing(ClassId id) const { return contains(id) && info(id).is_thing; }
    // Case-insensitive lookup; "unlabeled" maps to kUnlabeled.
    std::optional<ClassId> find(std::string_view name) const;
    std::vector<ClassId> ids() const;
    const std::vector<ClassInfo>& classes() const { return classes_; }

    friend bool operator==(const ClassCatalog&, const ClassCatalog&) = default;

private:
    std::vector<ClassInfo> classes_;
};

// Layer-name pattern: alternatives separated by '|', each a glob over the
// whole name with '*' (any run) and '?' (one char). Matching is
// case-insensitive (ASCII folding).
class LayerPattern {
public:
    // Throws std::invalid_argument with the reason when the text is not a
    // valid pattern.
    explicit LayerPattern(std::string_view text);

    bool matches(std::string_view layer_name) const;
    const std::string& text() const { return text_; }

private:
    std::string text_;
    std::vector<std::string> alternatives_;  // upper-cased
};

struct TableRow {
    LayerPattern pattern;
    ClassId class_id = kUnlabeled;
    std::string description;
};

struct ReferenceTable {
    std::vector<TableRow> rows;
    ClassCatalog catalog;
};

// Parses the tab-separated table format (docs/reference_table.md).
// Throws TableError(row, reason).
ReferenceTable load_reference_table(std::string_view source);

// The bundled default table text and its parsed form.
std::string_view default_reference_table_text();
const ReferenceTable& default_reference_table();

// First row whose pattern matches the full name.
std::optional<ClassId> match_layer(const ReferenceTable& table, std::string_view layer_name);

enum class DeviationMode {
    // Distinct primitive-bearing layers (the acceptance rule).
    Layers,
    // Fraction of primitives on unmatched layers; for analysis only.
    Primitives,
};

inline constexpr double kDefaultMaxDeviation = 0.05;

struct ScreeningReport {
    std::size_t total_layers = 0;
    std::size_t matched_layers = 0;
    std::vector<std::string> unmatched;  // sorted
    double deviation = 0.0;
    double threshold = kDefaultMaxDeviation;
    bool accepted = false;
    DeviationMode mode = DeviationMode::Layers;
};

// Accepts when deviation <= threshold; only strictly larger deviations
// reject. Throws EmptyDrawing when no layer carries a primitive.
ScreeningReport screen_drawing(const ReferenceTable& table, const ingest::FlatDrawing& drawing,
                               double threshold = kDefaultMaxDeviation,
                               DeviationMode mode = DeviationMode::Layers);

}  // namespace plancad::screening
