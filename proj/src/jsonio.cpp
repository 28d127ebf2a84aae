#include "plancad/jsonio.hpp"

#include <map>

namespace plancad::jsonio {

Json screening_json(const screening::ScreeningReport& r) {
    Json j;
    j["totalLayers"] = r.total_layers;
    j["matchedLayers"] = r.matched_layers;
    j["unmatched"] = r.unmatched;
    j["deviation"] = r.deviation;
    j["threshold"] = r.threshold;
    j["accepted"] = r.accepted;
    j["mode"] = r.mode == screening::DeviationMode::Layers ? "layers" : "primitives";
    return j;
}

Json flag_json(const annotator::ComplianceFlag& f) {
    Json j;
    j["kind"] = annotator::to_string(f.kind);
    j["subject"] = f.subject;
    j["detail"] = f.detail;
    j["ref"] = f.ref();
    return j;
}

Json flags_json(const std::vector<annotator::ComplianceFlag>& flags) {
    Json list = Json::array();
    for (const auto& f : flags) list.push_back(flag_json(f));
    return list;
}

Json labels_json(const annotator::AnnotatedDrawing& ann) {
    Json list = Json::array();
    for (std::size_t i = 0; i < ann.size(); ++i) {
        const auto& p = ann.drawing->primitives[i];
        Json j;
        j["sourceId"] = p.primitive.source_id;
        j["layer"] = p.layer;
        j["class"] = ann.catalog.name(ann.labels[i].cls);
        j["instance"] = ann.labels[i].instance;
        list.push_back(std::move(j));
    }
    return list;
}

Json layers_json(const annotator::AnnotatedDrawing& ann) {
    struct Info {
        std::size_t primitives = 0;
        std::map<std::string, std::size_t> classes;
    };
    std::map<std::string, Info> by_layer;
    for (std::size_t i = 0; i < ann.size(); ++i) {
        auto& info = by_layer[ann.drawing->primitives[i].layer];
        ++info.primitives;
        ++info.classes[ann.catalog.name(ann.labels[i].cls)];
    }
    Json list = Json::array();
    for (const auto& layer : ann.drawing->layers) {
        Json j;
        j["name"] = layer.name;
        j["visible"] = layer.visible;
        auto it = by_layer.find(layer.name);
        j["primitives"] = it == by_layer.end() ? 0 : it->second.primitives;
        Json classes = Json::object();
        if (it != by_layer.end()) {
            for (const auto& [name, count] : it->second.classes) classes[name] = count;
        }
        j["classes"] = std::move(classes);
        list.push_back(std::move(j));
    }
    return list;
}

Json drawing_json(const std::string& id, const workspace::Base& base, const annotator::AnnotatedDrawing& state,
                  std::size_t log_length) {
    Json j;
    j["id"] = id;
    j["unitScale"] = base.drawing->unit_scale;
    j["primitives"] = state.size();
    j["stage"] = state.stage == annotator::Stage::Semantic ? "semantic" : "instance";
    j["instances"] = state.instance_count();
    j["events"] = log_length;
    j["screening"] = screening_json(base.screening);
    j["layers"] = layers_json(state);
    std::map<std::string, std::size_t> by_kind;
    for (const auto& f : state.flags) ++by_kind[annotator::to_string(f.kind)];
    Json summary;
    summary["total"] = state.flags.size();
    Json kinds = Json::object();
    for (const auto& [kind, count] : by_kind) kinds[kind] = count;
    summary["byKind"] = std::move(kinds);
    j["flags"] = std::move(summary);
    return j;
}

Json event_json(const annotator::CorrectionEvent& event) { return Json::parse(annotator::to_log_line(event)); }

std::string error_line(const std::string& kind, const std::string& message) {
    Json j;
    j["error"] = kind;
    j["message"] = message;
    return j.dump();
}

}  // namespace plancad::jsonio
