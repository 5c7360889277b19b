#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "kgdial/pipeline.hpp"

namespace kgdial {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Transport-free router for the JSON API:
///   POST /sessions                     {config?}  -> {id, config}
///   POST /sessions/{id}/messages       {text}     -> {reply, turn}
///   GET  /sessions/{id}                           -> transcript
///   GET  /sessions/{id}/trace/{turn}              -> turn trace
///   GET  /healthz                                 -> {status: "ok"}
/// Errors are {error, stage?} with 400, 404 or 500.
class ApiHandler {
 public:
  explicit ApiHandler(SessionManager& sessions) : sessions_(sessions) {}
  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body);

 private:
  SessionManager& sessions_;
};

/// Transcript form shared by GET /sessions/{id} and the REPL.
nlohmann::json transcript_json(const Session& s);

/// cpp-httplib server around ApiHandler with permissive CORS headers.
class HttpServer {
 public:
  explicit HttpServer(SessionManager& sessions);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kgdial
