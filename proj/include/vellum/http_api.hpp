#pragma once

#include <string>

#include "vellum/service.hpp"

namespace httplib {
class Server;
}

namespace vellum {

/// Routes:
///   POST /sessions                          body: PNG            -> 201 {"id"}
///   GET  /sessions/{id}                                          -> session state
///   POST /sessions/{id}/seeds               {"seeds": [[x,y]]}   -> state
///   POST /sessions/{id}/strokes             {"strokes": [...]}   -> state
///   POST /sessions/{id}/infrared            body: PNG            -> state
///   POST /sessions/{id}/stages/{name}/run   params object        -> 202 {"job", "state", "cached"}
///   GET  /sessions/{id}/jobs/{job}                               -> job status
///   GET  /sessions/{id}/artifacts/{name}                         -> image/png
/// Errors are JSON {"error", "status"[, "missing"]}.
void register_routes(httplib::Server& server, AnnotationService& service);

/// Blocking server on host:port.
int serve(const std::string& host, int port, const ServiceOptions& options);

} // namespace vellum
