#include "audmem/service.hpp"

#include <httplib.h>

#include <thread>

namespace audmem {

struct HttpServer::Impl {
  ExperimentService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(ExperimentService& s) : service(s) {
    // Small JSON replies; without this each one waits on delayed ACKs.
    server.set_tcp_nodelay(true);
    routes();
  }

  static void send(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  }

  void routes() {
    server.Post("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.start_session(req.body));
    });
    server.Get(R"(/api/session/([^/]+)/clip/(-?\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      int position = 0;
      try {
        position = std::stoi(req.matches[2]);
      } catch (const std::exception&) {
        send(res, {400, "application/json", R"({"error":"BadRequest","message":"bad position"})"});
        return;
      }
      send(res, service.get_clip(req.matches[1], position));
    });
    server.Post(R"(/api/session/([^/]+)/click)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.click(req.matches[1], req.body));
    });
    server.Post(R"(/api/session/([^/]+)/finish)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.finish(req.matches[1]));
    });
    server.Post(R"(/api/session/([^/]+)/survey)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.submit_survey(req.matches[1], req.body));
    });
    server.Get("/api/headphone-check", [this](const httplib::Request&, httplib::Response& res) {
      send(res, service.headphone_check());
    });
    server.Get("/api/scores", [this](const httplib::Request&, httplib::Response& res) {
      send(res, service.scores());
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
      send(res, {500, "application/json", R"({"error":"Internal","message":"internal error"})"});
    });
  }
};

HttpServer::HttpServer(ExperimentService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace audmem
