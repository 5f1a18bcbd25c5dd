#pragma once

// JSON-over-HTTP front end for SessionManager and HumanEval. Every route lives
// under /api/v1; errors come back as {"error": {"type", "message"}}.

#include <functional>
#include <string>
#include <thread>

#include "httplib.h"
#include "iscr/session.hpp"
#include "json.hpp"

namespace iscr {

struct HttpError {
  int status;
  std::string type;
};

inline HttpError classify_error(const std::exception& e) {
  if (dynamic_cast<const NotFoundError*>(&e)) return {404, "not_found"};
  if (dynamic_cast<const ConflictError*>(&e)) return {409, "conflict"};
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e)) return {400, "validation"};
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return {400, "parse"};
  return {500, "internal"};
}

class HttpService {
 public:
  /// `info` is served verbatim at /api/v1/models.
  HttpService(const Dataset& data, SessionManager& sessions, HumanEval& humaneval, nlohmann::json info,
              const std::string& static_dir = {})
      : data_(&data), sessions_(&sessions), humaneval_(&humaneval), info_(std::move(info)) {
    routes();
    if (!static_dir.empty() && !server_.set_mount_point("/", static_dir))
      throw ValidationError("static directory '" + static_dir + "' does not exist");
  }

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;
  ~HttpService() { stop(); }

  /// Blocks until stop() is called from another thread.
  void listen(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }

  /// Binds an ephemeral port and serves on a background thread; returns the port.
  int start_background(const std::string& host = "127.0.0.1") {
    const int port = server_.bind_to_any_port(host);
    if (port < 0) throw Error("cannot bind " + host);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  using Handler = std::function<nlohmann::json(const httplib::Request&, httplib::Response&)>;

  static void send(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static nlohmann::json body_json(const httplib::Request& req) {
    if (req.body.empty()) throw ValidationError("request body is empty");
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("request body is not JSON: ") + e.what());
    }
  }

  /// Wraps a handler so that library errors become JSON error bodies.
  static httplib::Server::Handler wrap(Handler h, int ok_status = 200) {
    return [h = std::move(h), ok_status](const httplib::Request& req, httplib::Response& res) {
      try {
        send(res, ok_status, h(req, res));
      } catch (const std::exception& e) {
        const auto err = classify_error(e);
        send(res, err.status, {{"error", {{"type", err.type}, {"message", e.what()}}}});
      }
    };
  }

  void routes() {
    server_.Post("/api/v1/sessions", wrap([this](const auto& req, auto&) { return sessions_->create(body_json(req)); }, 201));
    server_.Get(R"(/api/v1/sessions/([^/]+))",
                wrap([this](const auto& req, auto&) { return sessions_->get(req.matches[1].str()); }));
    server_.Post(R"(/api/v1/sessions/([^/]+)/respond)", wrap([this](const auto& req, auto&) {
                   return sessions_->respond(req.matches[1].str(), body_json(req));
                 }));
    server_.Get("/api/v1/humaneval/task", wrap([this](const auto& req, auto&) {
                  return humaneval_->next_task(req.get_param_value("subject"));
                }));
    server_.Post("/api/v1/humaneval/choice",
                 wrap([this](const auto& req, auto&) { return humaneval_->submit(body_json(req)); }));
    server_.Get("/api/v1/humaneval/distribution",
                wrap([this](const auto&, auto&) { return humaneval_->distribution_json(); }));
    server_.Get("/api/v1/models", wrap([this](const auto&, auto&) { return info_; }));
    server_.Get("/api/v1/queries", wrap([this](const auto&, auto&) {
                  nlohmann::json out = nlohmann::json::array();
                  for (const auto& q : data_->queries) out.push_back({{"id", q.id}, {"terms", q.terms}});
                  return out;
                }));
    server_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.status != 404 || !res.body.empty()) return;
      send(res, 404, {{"error", {{"type", "not_found"}, {"message", "no route for " + req.method + " " + req.path}}}});
    });
  }

  const Dataset* data_;
  SessionManager* sessions_;
  HumanEval* humaneval_;
  nlohmann::json info_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace iscr
