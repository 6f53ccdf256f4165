#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "clickmask/core.hpp"
#include "clickmask/engines.hpp"
#include "clickmask/sequence.hpp"

namespace clickmask {

struct ServiceConfig {
    EngineParams engine;
    PropagationParams propagation;
    /// Relative image, frame and volume paths resolve against this directory.
    std::filesystem::path image_root = ".";
    /// Default target of /save and of autosave when a session is closed.
    std::filesystem::path save_directory;
    bool autosave = false;
    /// Background propagation workers.
    int workers = 2;
    /// Session and sequence ids count up from here.
    std::uint64_t id_seed = 0;
};

struct ServiceResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Row-major run lengths of a binary mask, starting with a run of zeros.
struct RunLength {
    std::vector<std::uint32_t> counts;
    int height = 0;
    int width = 0;
};

RunLength encode_rle(const LabelMask& mask);
/// Throws InvalidArgument unless the runs cover exactly height*width pixels.
LabelMask decode_rle(const RunLength& rle);

/// Annotation sessions and video sequences behind a transport-neutral
/// request handler. Requests for different sessions run concurrently;
/// requests for one session are serialized.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// `target` is the request path with optional query string. Bodies are
    /// JSON except POST /sessions, which also accepts raw image bytes.
    ServiceResponse handle(std::string_view method, std::string_view target, std::string_view body,
                           std::string_view content_type = "application/json");

    /// Blocks until queued propagation jobs have finished.
    void wait_idle();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// cpp-httplib front end forwarding every request to a Service.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds `host:port` (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); in-flight requests complete before it returns.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace clickmask
