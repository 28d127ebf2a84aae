#include "plancad/screening.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "plancad/errors.hpp"

namespace plancad::screening {

namespace {

std::string upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t at = s.find(sep, start);
        if (at == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, at - start));
        start = at + 1;
    }
}

// Glob match of an upper-cased pattern against an upper-cased name.
bool glob_match(std::string_view pattern, std::string_view name) {
    std::size_t p = 0;
    std::size_t n = 0;
    std::size_t star = std::string_view::npos;
    std::size_t resume = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            resume = n;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            n = ++resume;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

}  // namespace

ClassCatalog::ClassCatalog(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
    std::set<std::string> seen;
    for (auto& c : classes_) {
        c.name = lower(c.name);
        if (c.name.empty() || c.name == "unlabeled") {
            throw std::invalid_argument("invalid class name '" + c.name + "'");
        }
        if (!seen.insert(c.name).second) {
            throw std::invalid_argument("duplicate class '" + c.name + "'");
        }
    }
}

std::string ClassCatalog::name(ClassId id) const {
    if (id == kUnlabeled) return "unlabeled";
    return info(id).name;
}

std::optional<ClassId> ClassCatalog::find(std::string_view name) const {
    const std::string key = lower(trim(name));
    if (key == "unlabeled") return kUnlabeled;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].name == key) return static_cast<ClassId>(i + 1);
    }
    return std::nullopt;
}

std::vector<ClassId> ClassCatalog::ids() const {
    std::vector<ClassId> out;
    for (std::size_t i = 0; i < classes_.size(); ++i) out.push_back(static_cast<ClassId>(i + 1));
    return out;
}

LayerPattern::LayerPattern(std::string_view text) : text_(text) {
    if (text.empty()) throw std::invalid_argument("empty pattern");
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (u <= 0x20 || u == 0x7f) throw std::invalid_argument("whitespace or control character");
        if (std::string_view("[](){}\\^$+").find(c) != std::string_view::npos) {
            throw std::invalid_argument(std::string("reserved character '") + c + "'");
        }
    }
    for (std::string_view alt : split(text, '|')) {
        if (alt.empty()) throw std::invalid_argument("empty alternative");
        alternatives_.push_back(upper(alt));
    }
}

bool LayerPattern::matches(std::string_view layer_name) const {
    const std::string name = upper(layer_name);
    return std::any_of(alternatives_.begin(), alternatives_.end(),
                       [&](const std::string& alt) { return glob_match(alt, name); });
}

ReferenceTable load_reference_table(std::string_view source) {
    ReferenceTable table;
    std::vector<ClassInfo> classes;
    std::set<std::string> patterns;
    enum class Block { None, Classes, Done } block = Block::None;
    std::size_t line_no = 0;
    bool catalog_built = false;
    auto build_catalog = [&](std::size_t row) {
        if (catalog_built) return;
        try {
            table.catalog = ClassCatalog(classes);
        } catch (const std::invalid_argument& e) {
            throw TableError(row, e.what());
        }
        catalog_built = true;
    };
    for (std::string_view raw : split(source, '\n')) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line == "@classes") {
            if (block != Block::None || !table.rows.empty()) {
                throw TableError(line_no, "@classes must precede all rows and appear once");
            }
            block = Block::Classes;
            continue;
        }
        if (line == "@end") {
            if (block != Block::Classes) throw TableError(line_no, "@end without @classes");
            block = Block::Done;
            build_catalog(line_no);
            continue;
        }
        if (block == Block::Classes) {
            std::vector<std::string_view> parts;
            for (std::string_view part : split(line, '\t')) {
                if (!trim(part).empty()) parts.push_back(trim(part));
            }
            if (parts.size() == 1) {
                const auto space = line.find(' ');
                if (space != std::string_view::npos) {
                    parts = {trim(line.substr(0, space)), trim(line.substr(space + 1))};
                }
            }
            if (parts.size() != 2 || (parts[1] != "thing" && parts[1] != "stuff")) {
                throw TableError(line_no, "class line must be '<name> thing|stuff'");
            }
            classes.push_back({std::string(parts[0]), parts[1] == "thing"});
            continue;
        }
        build_catalog(line_no);
        const auto fields = split(raw, '\t');
        if (fields.size() != 3) {
            throw TableError(line_no, "expected 3 tab-separated fields, found " +
                                          std::to_string(fields.size()));
        }
        const std::string pattern_text(trim(fields[0]));
        std::optional<LayerPattern> pattern;
        try {
            pattern.emplace(pattern_text);
        } catch (const std::invalid_argument& e) {
            throw TableError(line_no, "bad pattern '" + pattern_text + "': " + e.what());
        }
        if (!patterns.insert(upper(pattern_text)).second) {
            throw TableError(line_no, "duplicate pattern '" + pattern_text + "'");
        }
        const auto cls = table.catalog.find(fields[1]);
        if (!cls || *cls == kUnlabeled) {
            throw TableError(line_no, "unknown class '" + std::string(trim(fields[1])) + "'");
        }
        table.rows.push_back({std::move(*pattern), *cls, std::string(trim(fields[2]))});
    }
    if (block == Block::Classes) throw TableError(line_no, "unterminated @classes block");
    build_catalog(line_no);
    return table;
}

std::optional<ClassId> match_layer(const ReferenceTable& table, std::string_view layer_name) {
    for (const auto& row : table.rows) {
        if (row.pattern.matches(layer_name)) return row.class_id;
    }
    return std::nullopt;
}

const ReferenceTable& default_reference_table() {
    static const ReferenceTable table = load_reference_table(default_reference_table_text());
    return table;
}

ScreeningReport screen_drawing(const ReferenceTable& table, const ingest::FlatDrawing& drawing,
                               double threshold, DeviationMode mode) {
    std::set<std::string> layers;
    for (const auto& p : drawing.primitives) layers.insert(p.layer);
    if (layers.empty()) throw EmptyDrawing("drawing has no primitive-bearing layers");

    ScreeningReport report;
    report.threshold = threshold;
    report.mode = mode;
    report.total_layers = layers.size();
    std::set<std::string> unmatched;
    for (const auto& name : layers) {
        if (match_layer(table, name)) {
            ++report.matched_layers;
        } else {
            unmatched.insert(name);
        }
    }
    report.unmatched.assign(unmatched.begin(), unmatched.end());
    if (mode == DeviationMode::Layers) {
        report.deviation = static_cast<double>(report.total_layers - report.matched_layers) /
                           static_cast<double>(report.total_layers);
    } else {
        std::size_t off = 0;
        for (const auto& p : drawing.primitives) off += unmatched.contains(p.layer) ? 1 : 0;
        report.deviation = static_cast<double>(off) / static_cast<double>(drawing.primitives.size());
    }
    report.accepted = report.deviation <= threshold;
    return report;
}

}  // namespace plancad::screening
