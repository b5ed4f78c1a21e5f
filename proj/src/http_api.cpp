#include "vellum/http_api.hpp"

#include <iostream>

#include "httplib.h"

namespace vellum {
using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

std::span<const std::uint8_t> body_bytes(const httplib::Request& req)
{
    return {reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()};
}

json parse_body(const httplib::Request& req, bool allow_empty)
{
    if (req.body.empty() && allow_empty) {
        return json::object();
    }
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw ServiceError(400, std::string("request body is not valid JSON: ") + e.what());
    }
}

json job_json(const JobStatus& st)
{
    json j{{"job", st.id}, {"stage", st.stage}, {"state", to_string(st.state)}, {"cached", st.cached}};
    if (st.state == JobState::Failed) {
        j["error"] = st.error;
        j["kind"] = st.error_kind;
    }
    return j;
}

template <typename F>
httplib::Server::Handler guarded(F f)
{
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const ServiceError& e) {
            json body{{"error", e.what()}, {"status", e.status()}};
            if (!e.missing().empty()) {
                body["missing"] = e.missing();
            }
            send_json(res, e.status(), body);
        } catch (const Error& e) {
            send_json(res, 400, {{"error", e.what()}, {"status", 400}, {"kind", to_string(e.kind())}});
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", e.what()}, {"status", 500}});
        }
    };
}

} // namespace

void register_routes(httplib::Server& server, AnnotationService& service)
{
    server.Post("/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 201, {{"id", service.create_session(body_bytes(req))}});
    }));
    server.Get(R"(/sessions/([0-9a-zA-Z]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, service.session_state(req.matches[1]));
    }));
    server.Post(R"(/sessions/([0-9a-zA-Z]+)/seeds)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json j = parse_body(req, false);
        if (!j.is_object() || !j.contains("seeds") || !j["seeds"].is_array()) {
            throw ServiceError(400, "expected {\"seeds\": [[x, y], ...]}");
        }
        std::vector<Pixel> seeds;
        for (const json& p : j["seeds"]) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
                throw ServiceError(400, "seeds must be integer [x, y] pairs");
            }
            seeds.push_back({p[0].get<int>(), p[1].get<int>()});
        }
        send_json(res, 200, service.set_seeds(req.matches[1], seeds));
    }));
    server.Post(R"(/sessions/([0-9a-zA-Z]+)/strokes)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, service.add_strokes(req.matches[1], strokes_from_json(parse_body(req, false))));
    }));
    server.Post(R"(/sessions/([0-9a-zA-Z]+)/infrared)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, service.set_infrared(req.matches[1], body_bytes(req)));
    }));
    server.Post(R"(/sessions/([0-9a-zA-Z]+)/stages/([0-9a-zA-Z_]+)/run)",
                guarded([&](const httplib::Request& req, httplib::Response& res) {
                    const std::string job = service.run_stage(req.matches[1], req.matches[2], parse_body(req, true));
                    send_json(res, 202, job_json(service.job(req.matches[1], job)));
                }));
    server.Get(R"(/sessions/([0-9a-zA-Z]+)/jobs/([0-9]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, job_json(service.job(req.matches[1], req.matches[2])));
    }));
    server.Get(R"(/sessions/([0-9a-zA-Z]+)/artifacts/([0-9a-zA-Z_]+))",
               guarded([&](const httplib::Request& req, httplib::Response& res) {
                   const auto bytes = service.artifact(req.matches[1], req.matches[2]);
                   res.status = 200;
                   res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
               }));
}

int serve(const std::string& host, int port, const ServiceOptions& options)
{
    AnnotationService service(options);
    httplib::Server server;
    register_routes(server, service);
    std::cerr << "vellum service listening on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ":" << port << "\n";
        return 2;
    }
    return 0;
}

} // namespace vellum
