#include "artn_tools/http_transport.hpp"

#include <httplib.h>

#include <chrono>

namespace artn::http {

using nlohmann::json;

ListenAddress parse_listen(const std::string& text) {
  ListenAddress addr;
  const auto colon = text.rfind(':');
  std::string port = text;
  if (colon != std::string::npos) {
    if (colon > 0) addr.host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    addr.port = std::stoi(port, &used);
    if (used != port.size() || addr.port < 0 || addr.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadRequest, "invalid listen address '" + text + "'");
  }
  return addr;
}

struct HttpServer::Impl {
  server::TrainingService& service;
  httplib::Server http;

  explicit Impl(server::TrainingService& s) : service(s) {
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    http.Post(R"(/api/([a-z_]+))", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = req.body.empty() ? json::object() : json::parse(req.body);
      } catch (const json::parse_error& e) {
        res.status = 400;
        res.set_content(json{{"v", server::kProtocolVersion},
                             {"error", {{"code", "BadRequest"}, {"message", e.what()}}}}
                            .dump(),
                        "application/json");
        return;
      }
      const auto out = service.handle(req.matches[1].str(), body);
      res.status = out.status;
      res.set_content(out.body.dump(), "application/json");
    });

    http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    http.Get(R"(/api/events/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string job = req.matches[1].str();
      try {
        service.wait_events(job, 0, std::chrono::milliseconds(0));
      } catch (const Error& e) {
        res.status = 404;
        res.set_content(json{{"v", server::kProtocolVersion},
                             {"error", {{"code", std::string(to_string(e.code()))}, {"message", e.detail()}}}}
                            .dump(),
                        "application/json");
        return;
      }
      auto offset = std::make_shared<std::size_t>(0);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, job, offset](std::size_t, httplib::DataSink& sink) {
        const auto batch = service.wait_events(job, *offset, std::chrono::milliseconds(500));
        for (const json& ev : batch.events) {
          const std::string frame = "id: " + std::to_string(++*offset) + "\nevent: " +
                                    ev["event"].get<std::string>() + "\ndata: " + ev.dump() + "\n\n";
          if (!sink.write(frame.data(), frame.size())) return false;
        }
        if (batch.closed) sink.done();
        return true;
      });
    });
  }
};

HttpServer::HttpServer(server::TrainingService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const ListenAddress& addr) {
  const int port = addr.port == 0 ? impl_->http.bind_to_any_port(addr.host)
                                  : (impl_->http.bind_to_port(addr.host, addr.port) ? addr.port : -1);
  if (port < 0) {
    throw Error(ErrorCode::Io, "cannot listen on " + addr.host + ":" + std::to_string(addr.port));
  }
  return port;
}

void HttpServer::serve() { impl_->http.listen_after_bind(); }

void HttpServer::stop() { impl_->http.stop(); }

}  // namespace artn::http
