#pragma once

#include <string>

#include "json.hpp"

#include "plancad/annotator.hpp"
#include "plancad/screening.hpp"
#include "plancad/workspace.hpp"

// JSON views shared by the command line and the HTTP service
// (docs/http_api.md).
namespace plancad::jsonio {

using Json = nlohmann::ordered_json;

Json screening_json(const screening::ScreeningReport& report);
Json flag_json(const annotator::ComplianceFlag& flag);
Json flags_json(const std::vector<annotator::ComplianceFlag>& flags);
// One entry per primitive in drawing order.
Json labels_json(const annotator::AnnotatedDrawing& ann);
// Layers with their primitive counts and assigned class.
Json layers_json(const annotator::AnnotatedDrawing& ann);
Json drawing_json(const std::string& id, const workspace::Base& base, const annotator::AnnotatedDrawing& state,
                  std::size_t log_length);
Json event_json(const annotator::CorrectionEvent& event);

// {"error": kind, "message": text} on one line.
std::string error_line(const std::string& kind, const std::string& message);

}  // namespace plancad::jsonio
