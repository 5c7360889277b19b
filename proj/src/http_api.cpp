#include "kgdial/http_api.hpp"

#include <regex>

#include <httplib.h>

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

namespace {

ApiResponse error(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

nlohmann::json parse_body(std::string_view body) {
  if (trim(body).empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

}  // namespace

nlohmann::json transcript_json(const Session& s) {
  auto messages = nlohmann::json::array();
  for (std::size_t i = 0; i < s.history.size(); ++i)
    messages.push_back(
        {{"speaker", i % 2 == 0 ? "user" : "bot"}, {"text", s.history[i]}, {"turn", i / 2}});
  return {{"id", s.id}, {"config", s.config.to_json()}, {"turns", s.traces.size()}, {"messages", messages}};
}

ApiResponse ApiHandler::handle(std::string_view method, std::string_view path, std::string_view body) {
  static const std::regex session_re(R"(^/sessions/([A-Za-z0-9_-]+)$)");
  static const std::regex messages_re(R"(^/sessions/([A-Za-z0-9_-]+)/messages$)");
  static const std::regex trace_re(R"(^/sessions/([A-Za-z0-9_-]+)/trace/([0-9]+)$)");
  const std::string p(path);
  std::smatch m;
  try {
    if (p == "/healthz") {
      if (method != "GET") return error(405, "method not allowed");
      return {200, {{"status", "ok"}, {"sessions", sessions_.session_count()}}};
    }
    if (p == "/sessions") {
      if (method != "POST") return error(405, "method not allowed");
      const auto j = parse_body(body);
      const auto cfg = j.contains("config")
                           ? PipelineConfig::from_json(j.at("config"), sessions_.defaults())
                           : sessions_.defaults();
      const auto id = sessions_.create_session(cfg);
      return {201, {{"id", id}, {"config", cfg.to_json()}}};
    }
    if (std::regex_match(p, m, messages_re)) {
      if (method != "POST") return error(405, "method not allowed");
      const auto j = parse_body(body);
      if (!j.is_object() || !j.contains("text") || !j.at("text").is_string())
        return error(400, "body must be {\"text\": string}");
      const auto text = j.at("text").get<std::string>();
      if (trim(text).empty()) return error(400, "text must be non-empty");
      const auto r = sessions_.chat(m[1].str(), text);
      return {200, {{"reply", r.reply}, {"turn", r.trace.turn}}};
    }
    if (std::regex_match(p, m, trace_re)) {
      if (method != "GET") return error(405, "method not allowed");
      return {200, sessions_.trace(m[1].str(), std::stoul(m[2].str())).to_json()};
    }
    if (std::regex_match(p, m, session_re)) {
      if (method != "GET") return error(405, "method not allowed");
      return {200, transcript_json(sessions_.snapshot(m[1].str()))};
    }
    return error(404, "no route for " + p);
  } catch (const NotFoundError& e) {
    return error(404, e.what());
  } catch (const ConfigError& e) {
    return error(400, e.what());
  } catch (const ValidationError& e) {
    return error(400, e.what());
  } catch (const StageError& e) {
    ApiResponse r = error(e.stage() == "input" ? 400 : 500, e.what());
    r.body["stage"] = e.stage();
    return r;
  } catch (const std::out_of_range& e) {
    return error(404, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

struct HttpServer::Impl {
  explicit Impl(SessionManager& s) : api(s) {}
  ApiHandler api;
  httplib::Server server;
};

HttpServer::HttpServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {
  auto& srv = impl_->server;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = impl_->api.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  srv.Get(R"(/.*)", forward);
  srv.Post(R"(/.*)", forward);
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::run() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace kgdial
