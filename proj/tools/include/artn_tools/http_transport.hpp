#pragma once

#include <memory>
#include <string>

#include "artn/server.hpp"

namespace artn::http {

struct ListenAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// "HOST:PORT", ":PORT" or "PORT". Throws BadRequest.
ListenAddress parse_listen(const std::string& text);

/// Serves a TrainingService over HTTP:
///   POST /api/<endpoint>     JSON request body, JSON response
///   GET  /api/events/<job>   server-sent events, one per job event; the
///                            stream ends after the terminal event
class HttpServer {
 public:
  explicit HttpServer(server::TrainingService& service);
  ~HttpServer();

  /// Binds without serving; port 0 picks a free port. Returns the bound port.
  /// Throws Io.
  int bind(const ListenAddress& addr);
  // Serves on the bound socket until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace artn::http
