#include "plancad/annotator.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

#include "json.hpp"
#include "plancad/errors.hpp"

namespace plancad::annotator {

namespace {

using Json = nlohmann::ordered_json;

const ingest::PlacedPrimitive& prim(const AnnotatedDrawing& ann, std::size_t i) {
    return ann.drawing->primitives[i];
}

const std::string& sid(const AnnotatedDrawing& ann, std::size_t i) {
    return prim(ann, i).primitive.source_id;
}

// Gives fresh instance ids to the thing-class primitives in `members`,
// grouped by (outermost refId, class); unblocked ones become singletons.
void allocate_instances(AnnotatedDrawing& ann, const std::vector<std::size_t>& members) {
    std::map<std::pair<std::string, ClassId>, std::vector<std::size_t>> blocked;
    std::vector<std::size_t> loose;
    for (std::size_t i : members) {
        const ClassId cls = ann.labels[i].cls;
        if (!ann.catalog.is_thing(cls)) continue;
        if (const auto* outer = prim(ann, i).outermost()) {
            blocked[{outer->ref_id, cls}].push_back(i);
        } else {
            loose.push_back(i);
        }
    }
    for (const auto& [_, group] : blocked) {
        const InstanceId z = ann.next_instance++;
        ann.live_instances.insert(z);
        for (std::size_t i : group) ann.labels[i].instance = z;
    }
    std::sort(loose.begin(), loose.end(),
              [&](std::size_t a, std::size_t b) { return sid(ann, a) < sid(ann, b); });
    for (std::size_t i : loose) {
        const InstanceId z = ann.next_instance++;
        ann.live_instances.insert(z);
        ann.labels[i].instance = z;
    }
}

// Reclassifies primitives; those whose class changes leave their instance and,
// for thing classes, join freshly allocated ones.
void set_class(AnnotatedDrawing& ann, const std::vector<std::size_t>& indices, ClassId cls) {
    std::vector<std::size_t> changed;
    for (std::size_t i : indices) {
        if (ann.labels[i].cls == cls) continue;
        ann.labels[i] = {cls, 0};
        changed.push_back(i);
    }
    if (ann.stage == Stage::Instance) allocate_instances(ann, changed);
}

std::map<InstanceId, std::vector<std::size_t>> instance_members(const AnnotatedDrawing& ann) {
    std::map<InstanceId, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < ann.labels.size(); ++i) {
        if (ann.labels[i].instance > 0) out[ann.labels[i].instance].push_back(i);
    }
    return out;
}

ClassId resolve_class(const AnnotatedDrawing& ann, const CorrectionEvent& ev, const std::string& name) {
    const auto cls = ann.catalog.find(name);
    if (!cls) throw BadEvent(ev.seq, "unknown class '" + name + "'");
    return *cls;
}

void apply_one(AnnotatedDrawing& ann, const CorrectionEvent& ev) {
    std::visit(
        [&](const auto& action) {
            using T = std::decay_t<decltype(action)>;
            if constexpr (std::is_same_v<T, SemanticOverride>) {
                const ClassId cls = resolve_class(ann, ev, action.class_name);
                std::vector<std::size_t> on_layer;
                bool any = false;
                for (std::size_t i = 0; i < ann.size(); ++i) {
                    if (prim(ann, i).layer != action.layer) continue;
                    any = true;
                    // Primitive-specific overrides win over layer-wide ones.
                    if (!ann.primitive_overrides.contains(sid(ann, i))) on_layer.push_back(i);
                }
                if (!any) throw BadEvent(ev.seq, "no primitives on layer '" + action.layer + "'");
                ann.layer_overrides[action.layer] = cls;
                set_class(ann, on_layer, cls);
            } else if constexpr (std::is_same_v<T, PrimitiveOverride>) {
                const ClassId cls = resolve_class(ann, ev, action.class_name);
                const auto i = ann.index_of(action.source_id);
                if (!i) throw BadEvent(ev.seq, "unknown primitive '" + action.source_id + "'");
                ann.primitive_overrides.insert(action.source_id);
                set_class(ann, {*i}, cls);
            } else if constexpr (std::is_same_v<T, MergeInstances>) {
                std::set<InstanceId> ids(action.instances.begin(), action.instances.end());
                if (ids.size() < 2) throw BadEvent(ev.seq, "merge needs at least two distinct instances");
                const auto members = instance_members(ann);
                std::optional<ClassId> cls;
                for (InstanceId z : ids) {
                    auto it = members.find(z);
                    if (it == members.end()) {
                        throw BadEvent(ev.seq, "unknown or empty instance " + std::to_string(z));
                    }
                    const ClassId c = ann.labels[it->second.front()].cls;
                    if (!ann.catalog.is_thing(c)) {
                        throw BadEvent(ev.seq, "instance " + std::to_string(z) + " is not a thing");
                    }
                    if (cls && *cls != c) throw BadEvent(ev.seq, "merge across different classes");
                    cls = c;
                }
                const InstanceId survivor = *ids.begin();
                for (InstanceId z : ids) {
                    if (z == survivor) continue;
                    for (std::size_t i : members.at(z)) ann.labels[i].instance = survivor;
                    ann.live_instances.erase(z);
                }
            } else if constexpr (std::is_same_v<T, SplitInstance>) {
                const auto members = instance_members(ann);
                auto it = members.find(action.instance);
                if (it == members.end()) {
                    throw BadEvent(ev.seq, "unknown or empty instance " + std::to_string(action.instance));
                }
                std::set<std::string> expected;
                for (std::size_t i : it->second) expected.insert(sid(ann, i));
                std::set<std::string> covered;
                std::vector<std::vector<std::size_t>> cells;
                for (const auto& cell : action.cells) {
                    if (cell.empty()) throw BadEvent(ev.seq, "empty partition cell");
                    auto& out = cells.emplace_back();
                    for (const auto& id : cell) {
                        if (!expected.contains(id)) {
                            throw BadEvent(ev.seq, "'" + id + "' is not a member of instance " +
                                                       std::to_string(action.instance));
                        }
                        if (!covered.insert(id).second) {
                            throw BadEvent(ev.seq, "'" + id + "' appears in two cells");
                        }
                        out.push_back(*ann.index_of(id));
                    }
                }
                if (covered.size() != expected.size()) {
                    throw BadEvent(ev.seq, "partition does not cover instance " +
                                               std::to_string(action.instance));
                }
                ann.live_instances.erase(action.instance);
                for (const auto& cell : cells) {
                    const InstanceId z = ann.next_instance++;
                    ann.live_instances.insert(z);
                    for (std::size_t i : cell) ann.labels[i].instance = z;
                }
            } else if constexpr (std::is_same_v<T, AcceptFlag>) {
                const auto current = check_compliance(ann);
                const bool known = std::any_of(current.begin(), current.end(), [&](const ComplianceFlag& f) {
                    return f.ref() == action.flag_ref;
                });
                if (!known) throw BadEvent(ev.seq, "no open flag '" + action.flag_ref + "'");
                ann.accepted_flags.insert(action.flag_ref);
            }
        },
        ev.action);
}

int flag_rank(const ComplianceFlag& f) { return static_cast<int>(f.kind); }

bool flag_less(const ComplianceFlag& a, const ComplianceFlag& b) {
    if (flag_rank(a) != flag_rank(b)) return flag_rank(a) < flag_rank(b);
    if (a.kind == FlagKind::EmptyInstance) return std::stoi(a.subject) < std::stoi(b.subject);
    return a.subject < b.subject;
}

std::vector<std::string> string_list(const Json& j, const char* key) {
    std::vector<std::string> out;
    for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
    return out;
}

}  // namespace

const char* to_string(FlagKind kind) {
    switch (kind) {
        case FlagKind::UnblockedThing: return "UnblockedThing";
        case FlagKind::ClassConflictInBlock: return "ClassConflictInBlock";
        case FlagKind::UnmatchedLayer: return "UnmatchedLayer";
        case FlagKind::EmptyInstance: return "EmptyInstance";
    }
    return "?";
}

std::optional<FlagKind> flag_kind_from_string(std::string_view name) {
    for (FlagKind k : {FlagKind::UnblockedThing, FlagKind::ClassConflictInBlock,
                       FlagKind::UnmatchedLayer, FlagKind::EmptyInstance}) {
        if (name == to_string(k)) return k;
    }
    return std::nullopt;
}

std::string ComplianceFlag::ref() const { return std::string(to_string(kind)) + ":" + subject; }

const char* action_name(const CorrectionAction& action) {
    return std::visit(
        [](const auto& a) -> const char* {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, SemanticOverride>) return "SemanticOverride";
            if constexpr (std::is_same_v<T, PrimitiveOverride>) return "PrimitiveOverride";
            if constexpr (std::is_same_v<T, MergeInstances>) return "MergeInstances";
            if constexpr (std::is_same_v<T, SplitInstance>) return "SplitInstance";
            if constexpr (std::is_same_v<T, AcceptFlag>) return "AcceptFlag";
        },
        action);
}

std::string to_log_line(const CorrectionEvent& ev) {
    Json j;
    j["eventId"] = ev.event_id;
    j["seq"] = ev.seq;
    j["kind"] = action_name(ev.action);
    std::visit(
        [&j](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, SemanticOverride>) {
                j["layer"] = a.layer;
                j["class"] = a.class_name;
            } else if constexpr (std::is_same_v<T, PrimitiveOverride>) {
                j["sourceId"] = a.source_id;
                j["class"] = a.class_name;
            } else if constexpr (std::is_same_v<T, MergeInstances>) {
                j["instances"] = a.instances;
            } else if constexpr (std::is_same_v<T, SplitInstance>) {
                j["instance"] = a.instance;
                j["cells"] = a.cells;
            } else if constexpr (std::is_same_v<T, AcceptFlag>) {
                j["flag"] = a.flag_ref;
            }
        },
        ev.action);
    j["author"] = ev.author;
    j["timestamp"] = ev.timestamp;
    return j.dump();
}

CorrectionEvent parse_log_line(std::string_view line, bool allow_missing_seq) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(std::string("not a JSON object: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
    try {
        CorrectionEvent ev;
        ev.event_id = j.at("eventId").get<std::string>();
        if (ev.event_id.empty()) throw std::invalid_argument("empty eventId");
        if (j.contains("seq")) {
            ev.seq = j.at("seq").get<long long>();
        } else if (!allow_missing_seq) {
            throw std::invalid_argument("missing seq");
        }
        ev.author = j.value("author", "");
        ev.timestamp = j.value("timestamp", "");
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "SemanticOverride") {
            ev.action = SemanticOverride{j.at("layer").get<std::string>(), j.at("class").get<std::string>()};
        } else if (kind == "PrimitiveOverride") {
            ev.action = PrimitiveOverride{j.at("sourceId").get<std::string>(), j.at("class").get<std::string>()};
        } else if (kind == "MergeInstances") {
            ev.action = MergeInstances{j.at("instances").get<std::vector<InstanceId>>()};
        } else if (kind == "SplitInstance") {
            SplitInstance split;
            split.instance = j.at("instance").get<InstanceId>();
            for (const auto& cell : j.at("cells")) {
                Json wrapper;
                wrapper["c"] = cell;
                split.cells.push_back(string_list(wrapper, "c"));
            }
            ev.action = std::move(split);
        } else if (kind == "AcceptFlag") {
            ev.action = AcceptFlag{j.at("flag").get<std::string>()};
        } else {
            throw std::invalid_argument("unknown event kind '" + kind + "'");
        }
        return ev;
    } catch (const Json::exception& e) {
        throw std::invalid_argument(std::string("bad event record: ") + e.what());
    }
}

std::optional<std::size_t> AnnotatedDrawing::index_of(const std::string& source_id) const {
    auto it = index->find(source_id);
    if (it == index->end()) return std::nullopt;
    return it->second;
}

const PanopticLabel& AnnotatedDrawing::label_of(const std::string& source_id) const {
    const auto i = index_of(source_id);
    if (!i) throw std::out_of_range("unknown primitive '" + source_id + "'");
    return labels[*i];
}

std::map<std::string, PanopticLabel> AnnotatedDrawing::labels_by_source() const {
    std::map<std::string, PanopticLabel> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out.emplace(sid(*this, i), labels[i]);
    return out;
}

std::size_t AnnotatedDrawing::instance_count() const {
    std::set<InstanceId> ids;
    for (const auto& l : labels) {
        if (l.instance > 0) ids.insert(l.instance);
    }
    return ids.size();
}

bool AnnotatedDrawing::same_state(const AnnotatedDrawing& o) const {
    return (drawing == o.drawing || *drawing == *o.drawing) && catalog == o.catalog &&
           labels == o.labels && flags == o.flags && provenance_index == o.provenance_index &&
           stage == o.stage && unmatched_layers == o.unmatched_layers &&
           layer_overrides == o.layer_overrides && primitive_overrides == o.primitive_overrides &&
           live_instances == o.live_instances && next_instance == o.next_instance &&
           accepted_flags == o.accepted_flags && applied_events == o.applied_events &&
           last_seq == o.last_seq;
}

AnnotatedDrawing assign_semantics(const ingest::FlatDrawing& drawing,
                                  const screening::ReferenceTable& table) {
    return assign_semantics(std::make_shared<const ingest::FlatDrawing>(drawing), table);
}

AnnotatedDrawing assign_semantics(std::shared_ptr<const ingest::FlatDrawing> drawing,
                                  const screening::ReferenceTable& table) {
    AnnotatedDrawing ann;
    auto index = std::make_shared<std::unordered_map<std::string, std::size_t>>();
    index->reserve(drawing->primitives.size());
    for (std::size_t i = 0; i < drawing->primitives.size(); ++i) {
        const auto& p = drawing->primitives[i];
        if (!index->emplace(p.primitive.source_id, i).second) {
            throw std::invalid_argument("duplicate source id '" + p.primitive.source_id + "'");
        }
        if (const auto* outer = p.outermost()) {
            ann.provenance_index[outer->ref_id].insert(p.primitive.source_id);
        }
    }
    ann.index = std::move(index);
    ann.drawing = std::move(drawing);
    ann.catalog = table.catalog;
    ann.stage = Stage::Semantic;

    std::map<std::string, std::optional<ClassId>> layer_class;
    ann.labels.reserve(ann.drawing->primitives.size());
    for (const auto& p : ann.drawing->primitives) {
        auto [it, inserted] = layer_class.try_emplace(p.layer);
        if (inserted) {
            it->second = screening::match_layer(table, p.layer);
            if (!it->second) ann.unmatched_layers.insert(p.layer);
        }
        ann.labels.push_back({it->second.value_or(kUnlabeled), 0});
    }
    ann.flags = check_compliance(ann);
    return ann;
}

AnnotatedDrawing propose_instances(const AnnotatedDrawing& input) {
    AnnotatedDrawing ann = input;
    ann.stage = Stage::Instance;
    ann.live_instances.clear();
    ann.next_instance = 1;
    std::vector<std::size_t> all(ann.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
        ann.labels[i].instance = 0;
    }
    allocate_instances(ann, all);
    ann.flags = check_compliance(ann);
    return ann;
}

std::vector<ComplianceFlag> check_compliance(const AnnotatedDrawing& ann) {
    std::vector<ComplianceFlag> flags;
    const auto members = instance_members(ann);

    for (std::size_t i = 0; i < ann.size(); ++i) {
        const auto& l = ann.labels[i];
        if (!ann.catalog.is_thing(l.cls) || l.instance <= 0) continue;
        if (prim(ann, i).outermost() != nullptr) continue;
        if (members.at(l.instance).size() != 1) continue;
        flags.push_back({FlagKind::UnblockedThing, sid(ann, i),
                         ann.catalog.name(l.cls) + " primitive outside any block reference"});
    }

    for (const auto& [ref, ids] : ann.provenance_index) {
        std::set<ClassId> classes;
        for (const auto& id : ids) {
            const ClassId c = ann.labels[*ann.index_of(id)].cls;
            if (c != kUnlabeled) classes.insert(c);
        }
        if (classes.size() < 2) continue;
        std::string detail;
        for (ClassId c : classes) detail += (detail.empty() ? "" : ",") + ann.catalog.name(c);
        flags.push_back({FlagKind::ClassConflictInBlock, ref, detail});
    }

    for (const auto& layer : ann.unmatched_layers) {
        if (ann.layer_overrides.contains(layer)) continue;
        flags.push_back({FlagKind::UnmatchedLayer, layer, "no reference-table row matches"});
    }

    for (InstanceId z : ann.live_instances) {
        if (members.contains(z)) continue;
        flags.push_back({FlagKind::EmptyInstance, std::to_string(z), "instance has no primitives"});
    }

    std::erase_if(flags, [&](const ComplianceFlag& f) { return ann.accepted_flags.contains(f.ref()); });
    std::sort(flags.begin(), flags.end(), flag_less);
    return flags;
}

AnnotatedDrawing apply_corrections(const AnnotatedDrawing& input,
                                   const std::vector<CorrectionEvent>& log) {
    std::set<std::string> ids;
    for (std::size_t k = 0; k < log.size(); ++k) {
        if (k > 0 && log[k].seq <= log[k - 1].seq) {
            throw BadEvent(log[k].seq, "seq not strictly increasing");
        }
        if (!ids.insert(log[k].event_id).second) {
            throw BadEvent(log[k].seq, "duplicate eventId '" + log[k].event_id + "'");
        }
    }
    AnnotatedDrawing ann = input;
    for (const auto& ev : log) {
        if (ann.applied_events.contains(ev.event_id)) continue;
        if (ev.seq <= ann.last_seq) {
            throw BadEvent(ev.seq, "seq must exceed " + std::to_string(ann.last_seq));
        }
        apply_one(ann, ev);
        ann.applied_events.insert(ev.event_id);
        ann.last_seq = ev.seq;
    }
    ann.flags = check_compliance(ann);
    return ann;
}

AnnotatedDrawing annotate(std::shared_ptr<const ingest::FlatDrawing> drawing,
                          const screening::ReferenceTable& table) {
    return propose_instances(assign_semantics(std::move(drawing), table));
}

}  // namespace plancad::annotator
