#include "clickmask/service.hpp"

#include "httplib.h"

namespace clickmask {

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) {
        const auto forward = [this](const httplib::Request& req, httplib::Response& res) {
            std::string target = req.path;
            if (!req.params.empty()) {
                char sep = '?';
                for (const auto& [k, v] : req.params) {
                    target += sep + k + "=" + v;
                    sep = '&';
                }
            }
            const ServiceResponse out = service.handle(req.method, target, req.body, req.get_header_value("Content-Type"));
            res.status = out.status;
            res.set_content(out.body, out.content_type);
        };
        server.Get(".*", forward);
        server.Post(".*", forward);
        server.Patch(".*", forward);
        server.Delete(".*", forward);
        server.Put(".*", forward);
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() {
    if (!impl_->server.listen_after_bind()) throw Error(ErrorCode::IoFailure, "server stopped unexpectedly");
}

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace clickmask
