#pragma once

#include <string>

#include "httplib.h"

#include "plancad/chunker.hpp"
#include "plancad/workspace.hpp"

// The /v1 HTTP API over a workspace (docs/http_api.md).
namespace plancad::service {

struct ServiceOptions {
    // When non-empty, mutating endpoints require "Authorization: Bearer <token>".
    std::string auth_token;
    double chunk_size_m = chunker::kDefaultChunkSizeM;
};

// Handlers keep a copy of the options and a reference to the workspace.
void install_routes(httplib::Server& server, workspace::Workspace& ws, const ServiceOptions& options);

}  // namespace plancad::service
