#include "service.hpp"

#include <stdexcept>

#include "plancad/errors.hpp"
#include "plancad/jsonio.hpp"

namespace plancad::service {

namespace {

using jsonio::Json;

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    res.status = status;
    res.set_content(jsonio::error_line(kind, message) + "\n", "application/json");
}

// Runs a handler and maps library errors onto status codes.
template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const UnknownDrawing& e) {
            send_error(res, 404, e.kind(), e.what());
        } catch (const BadEvent& e) {
            send_error(res, 400, e.kind(), e.what());
        } catch (const SeqConflict& e) {
            send_error(res, 409, e.kind(), e.what());
        } catch (const Error& e) {
            send_error(res, 500, e.kind(), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "InternalError", e.what());
        }
    };
}

std::vector<chunker::Chunk> chunks_of(workspace::Workspace& ws, const std::string& id, double size_m) {
    return chunker::chunk_drawing(ws.project_state(id), id, size_m);
}

}  // namespace

void install_routes(httplib::Server& server, workspace::Workspace& ws, const ServiceOptions& options) {
    server.Get("/v1/drawings", guarded([&ws](const httplib::Request&, httplib::Response& res) {
                   Json list = Json::array();
                   for (const auto& id : ws.drawing_ids()) {
                       const auto base = ws.base(id);
                       const auto state = ws.project_state(id);
                       Json j;
                       j["id"] = id;
                       j["primitives"] = state.size();
                       j["accepted"] = base->screening.accepted;
                       j["deviation"] = base->screening.deviation;
                       j["flags"] = state.flags.size();
                       j["events"] = ws.read_log(id).size();
                       list.push_back(std::move(j));
                   }
                   Json body;
                   body["drawings"] = std::move(list);
                   send_json(res, 200, body);
               }));

    server.Get(R"(/v1/drawings/([^/]+))", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   const auto base = ws.base(id);
                   send_json(res, 200, jsonio::drawing_json(id, *base, ws.project_state(id), ws.read_log(id).size()));
               }));

    server.Get(R"(/v1/drawings/([^/]+)/chunks)",
               guarded([&ws, options](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   Json list = Json::array();
                   for (const auto& c : chunks_of(ws, id, options.chunk_size_m)) {
                       Json j;
                       j["id"] = c.id.str();
                       j["col"] = c.id.col;
                       j["row"] = c.id.row;
                       j["origin"] = {c.origin.x, c.origin.y};
                       j["sizeM"] = c.size_m;
                       j["primitives"] = c.primitives.size();
                       list.push_back(std::move(j));
                   }
                   Json body;
                   body["drawing"] = id;
                   body["chunks"] = std::move(list);
                   send_json(res, 200, body);
               }));

    server.Get(R"(/v1/drawings/([^/]+)/chunks/([^/]+))",
               guarded([&ws, options](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   const std::string cid = req.matches[2];
                   for (const auto& c : chunks_of(ws, id, options.chunk_size_m)) {
                       if (c.id.str() == cid) {
                           res.status = 200;
                           res.set_content(chunker::export_chunk(c), "image/svg+xml");
                           return;
                       }
                   }
                   send_error(res, 404, "UnknownChunk", "no chunk '" + cid + "' in drawing '" + id + "'");
               }));

    server.Get(R"(/v1/drawings/([^/]+)/flags)", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   Json body;
                   body["drawing"] = id;
                   body["flags"] = jsonio::flags_json(ws.project_state(id).flags);
                   send_json(res, 200, body);
               }));

    server.Get(R"(/v1/drawings/([^/]+)/labels)", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   const auto state = ws.project_state(id);
                   Json body;
                   body["drawing"] = id;
                   body["instances"] = state.instance_count();
                   body["labels"] = jsonio::labels_json(state);
                   send_json(res, 200, body);
               }));

    server.Get(R"(/v1/drawings/([^/]+)/export)",
               guarded([&ws, options](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   const auto state = ws.project_state(id);
                   Json list = Json::array();
                   for (const auto& c : chunker::chunk_drawing(state, id, options.chunk_size_m)) {
                       Json j;
                       j["id"] = c.id.str();
                       j["markup"] = chunker::export_chunk(c);
                       list.push_back(std::move(j));
                   }
                   Json body;
                   body["drawing"] = id;
                   body["instances"] = state.instance_count();
                   body["chunks"] = std::move(list);
                   send_json(res, 200, body);
               }));

    server.Post(R"(/v1/drawings/([^/]+)/corrections)",
                guarded([&ws, options](const httplib::Request& req, httplib::Response& res) {
                    if (!options.auth_token.empty() &&
                        req.get_header_value("Authorization") != "Bearer " + options.auth_token) {
                        send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
                        return;
                    }
                    const std::string id = req.matches[1];
                    if (!ws.has(id)) throw UnknownDrawing("no drawing '" + id + "'");
                    annotator::CorrectionEvent event;
                    try {
                        event = annotator::parse_log_line(req.body, true);
                    } catch (const std::invalid_argument& e) {
                        send_error(res, 400, "BadRequest", e.what());
                        return;
                    }
                    const auto ack = ws.record_correction(id, event);
                    Json body;
                    body["event"] = jsonio::event_json(ack.event);
                    body["duplicate"] = ack.duplicate;
                    body["logLength"] = ack.log_length;
                    send_json(res, ack.duplicate ? 200 : 201, body);
                }));
}

}  // namespace plancad::service
