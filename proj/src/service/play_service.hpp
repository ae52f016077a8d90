#pragma once

// Human-versus-engine sessions behind a small JSON request handler, plus the
// HTTP server that exposes it.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "core/evaluation.hpp"
#include "core/go_engine.hpp"
#include "core/pipeline.hpp"

namespace qzero::service {

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct ServiceConfig {
    double komi = 7.5;
    double alpha_display = 0.081;
    uint64_t seed = 1;
};

class PlayService {
public:
    PlayService(pipeline::ParamsPtr params, ServiceConfig config);
    ~PlayService();

    /// Routes one request. Never throws; failures become {code, message} bodies.
    Response handle(const std::string& method, const std::string& path, const std::string& body);

    size_t session_count() const;
    int board_size() const { return params_->config.board_size; }

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;
    Response create(const std::string& body);
    Response route_session(const std::string& method, const std::string& id, const std::string& action, const std::string& body);

    pipeline::ParamsPtr params_;
    ServiceConfig config_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    uint64_t next_id_ = 0;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;  // served at / when non-empty
};

/// Blocks until stop() is called from another thread or the process exits.
class HttpServer {
public:
    HttpServer(PlayService& service, ServerOptions options);
    ~HttpServer();
    /// Binds and serves. Returns false when the address cannot be bound.
    bool run();
    /// Binds to an ephemeral port and serves on a background thread. Returns the port.
    int start_background();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace qzero::service
