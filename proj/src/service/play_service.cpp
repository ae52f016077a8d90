#include "service/play_service.hpp"

#include <cmath>
#include <cstdio>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "core/error.hpp"
#include "core/soft_q.hpp"

namespace qzero::service {

using json = nlohmann::json;

namespace {

Response error_response(int status, const std::string& code, const std::string& message) {
    return Response{status, "application/json", json{{"code", code}, {"message", message}}.dump()};
}

Response ok(const json& j) { return Response{200, "application/json", j.dump()}; }

const char* colour_name(go::Stone c) {
    switch (c) {
        case go::Stone::Black: return "black";
        case go::Stone::White: return "white";
        default: return "none";
    }
}

go::Stone parse_colour(const std::string& s) {
    if (s == "black") return go::Stone::Black;
    if (s == "white") return go::Stone::White;
    if (s == "none" || s == "both") return go::Stone::Empty;
    fail(ErrorCode::InvalidArgument, "colour must be black, white or none");
}

eval::PlayMode parse_mode(const std::string& s) {
    if (s == "argmax") return eval::PlayMode::Argmax;
    if (s == "sampling") return eval::PlayMode::Sampling;
    fail(ErrorCode::InvalidArgument, "mode must be argmax or sampling");
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        const size_t j = path.find('/', i);
        const size_t end = j == std::string::npos ? path.size() : j;
        if (end > i) parts.push_back(path.substr(i, end - i));
        i = end;
    }
    return parts;
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return j;
}

}  // namespace

struct PlayService::Session {
    std::mutex mutex;
    std::string id;
    go::BoardConfig board;
    go::GameState state;
    go::Stone engine_colour = go::Stone::White;
    eval::PlayMode mode = eval::PlayMode::Argmax;
    double alpha_display = 0.081;
    std::vector<int> moves;
    Rng rng;
    std::unique_ptr<eval::NetPlayer> engine;

    json state_json() const {
        const int n = board.size;
        json grid = json::array();
        for (int r = 0; r < n; ++r) {
            std::string row;
            for (int c = 0; c < n; ++c) {
                const auto s = state.at(r, c);
                row += s == go::Stone::Black ? 'X' : s == go::Stone::White ? 'O' : '.';
            }
            grid.push_back(row);
        }
        json j{{"session_id", id},
               {"size", n},
               {"komi", board.komi},
               {"board", grid},
               {"to_move", colour_name(state.to_move)},
               {"terminal", state.terminal},
               {"move_count", state.move_count},
               {"move_log", moves},
               {"engine_color", colour_name(engine_colour)},
               {"mode", mode == eval::PlayMode::Argmax ? "argmax" : "sampling"},
               {"pass_action", board.pass()}};
        j["legal_mask"] = state.terminal ? std::vector<uint8_t>(board.actions(), 0) : go::legal_mask(state);
        if (state.terminal) {
            const auto sc = go::score(state);
            j["score"] = json{{"black_area", sc.area_black}, {"white_area", sc.area_white}, {"score", sc.score},
                              {"winner", sc.score > 0 ? "black" : "white"}};
        } else {
            j["score"] = nullptr;
        }
        return j;
    }

    void apply(int action) {
        const auto r = go::step(state, action);
        state = r.state;
        moves.push_back(action);
    }

    // Engine moves while it is the side to move. Returns the actions played.
    json engine_reply() {
        json played = json::array();
        while (!state.terminal && state.to_move == engine_colour) {
            const int a = engine->act(state, rng);
            apply(a);
            played.push_back(a);
        }
        return played;
    }

    void reset() {
        state = go::new_game(board);
        moves.clear();
    }
};

PlayService::PlayService(pipeline::ParamsPtr params, ServiceConfig config) : params_(std::move(params)), config_(config) {
    if (!params_) fail(ErrorCode::InvalidArgument, "play service needs parameters");
}

PlayService::~PlayService() = default;

size_t PlayService::session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

std::shared_ptr<PlayService::Session> PlayService::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

Response PlayService::create(const std::string& body) {
    const json req = parse_body(body);
    auto s = std::make_shared<Session>();
    s->board.size = req.value("size", board_size());
    if (s->board.size != board_size()) {
        return error_response(400, "bad_request",
                              "this engine plays " + std::to_string(board_size()) + "x" + std::to_string(board_size()) + " only");
    }
    s->board.komi = req.value("komi", config_.komi);
    s->board.validate();
    if (req.contains("engine_color")) {
        s->engine_colour = parse_colour(req.at("engine_color").get<std::string>());
    } else {
        const go::Stone human = parse_colour(req.value("human_color", std::string("black")));
        s->engine_colour = human == go::Stone::Empty ? go::Stone::Empty : go::opponent(human);
    }
    s->mode = parse_mode(req.value("mode", std::string("argmax")));
    s->alpha_display = req.value("alpha_display", config_.alpha_display);
    if (!(s->alpha_display > 0.0) || !std::isfinite(s->alpha_display)) {
        return error_response(400, "bad_request", "alpha_display must be positive");
    }
    {
        std::lock_guard lock(mutex_);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(splitmix64(config_.seed ^ ++next_id_)));
        s->id = buf;
        s->rng = Rng(derive_seed(config_.seed, next_id_));
        sessions_[s->id] = s;
    }
    s->engine = std::make_unique<eval::NetPlayer>(params_, s->mode, s->alpha_display);
    std::lock_guard lock(s->mutex);
    s->reset();
    json j;
    j["engine_moves"] = s->engine_reply();
    j["session_id"] = s->id;
    j["state"] = s->state_json();
    return ok(j);
}

Response PlayService::route_session(const std::string& method, const std::string& id, const std::string& action,
                                    const std::string& body) {
    auto s = find(id);
    if (!s) return error_response(404, "unknown_session", "no session " + id);
    std::lock_guard lock(s->mutex);

    if (method == "GET" && action.empty()) return ok(s->state_json());
    if (method == "GET" && action == "sgf") return Response{200, "application/x-go-sgf", go::to_sgf({s->board, s->moves})};
    if (method == "GET" && action == "analysis") {
        if (s->state.terminal) return error_response(409, "terminal", "the game is over");
        const auto q = s->engine->q_values(s->state);
        const auto mask = go::legal_mask(s->state);
        const auto pi = softq::policy_from_q<float>(q, mask, s->alpha_display);
        return ok(json{{"q_values", q},
                       {"policy", pi.probs},
                       {"argmax", softq::masked_argmax<float>(q, mask)},
                       {"alpha", s->alpha_display},
                       {"legal_mask", mask}});
    }
    if (method == "POST" && (action == "move" || action == "pass")) {
        int a = s->board.pass();
        if (action == "move") {
            const json req = parse_body(body);
            if (req.contains("action")) {
                if (!req.at("action").is_number_integer()) return error_response(400, "bad_request", "action must be an integer");
                a = req.at("action").get<int>();
            } else if (req.contains("row") && req.contains("col")) {
                const int r = req.at("row").get<int>(), c = req.at("col").get<int>();
                if (r < 0 || c < 0 || r >= s->board.size || c >= s->board.size) {
                    return error_response(409, "out_of_range", "point is off the board");
                }
                a = r * s->board.size + c;
            } else {
                return error_response(400, "bad_request", "move needs action or row/col");
            }
        }
        if (!s->state.terminal && s->state.to_move == s->engine_colour) {
            return error_response(409, "not_your_turn", "the engine is to move");
        }
        const auto err = go::check_move(s->state, a);
        if (err != go::MoveError::None) return error_response(409, go::to_string(err), std::string("illegal move: ") + go::to_string(err));
        s->apply(a);
        json j;
        j["human_move"] = a;
        j["engine_moves"] = s->engine_reply();
        j["state"] = s->state_json();
        return ok(j);
    }
    if (method == "POST" && action == "new") {
        const json req = parse_body(body);
        if (req.contains("human_color")) {
            const go::Stone human = parse_colour(req.at("human_color").get<std::string>());
            s->engine_colour = human == go::Stone::Empty ? go::Stone::Empty : go::opponent(human);
        }
        if (req.contains("mode")) {
            s->mode = parse_mode(req.at("mode").get<std::string>());
            s->engine = std::make_unique<eval::NetPlayer>(params_, s->mode, s->alpha_display);
        }
        s->reset();
        json j;
        j["engine_moves"] = s->engine_reply();
        j["state"] = s->state_json();
        return ok(j);
    }
    return error_response(404, "not_found", method + " /game/" + id + (action.empty() ? "" : "/" + action));
}

Response PlayService::handle(const std::string& method, const std::string& path, const std::string& body) {
    try {
        const auto parts = split_path(path);
        if (parts.empty() || parts[0] != "game" || parts.size() > 3) return error_response(404, "not_found", "no route for " + path);
        if (parts.size() == 1) {
            if (method != "POST") return error_response(405, "method_not_allowed", "use POST /game");
            return create(body);
        }
        return route_session(method, parts[1], parts.size() == 3 ? parts[2] : "", body);
    } catch (const json::exception& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IllegalMove) return error_response(409, "illegal", e.what());
        if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::Config) return error_response(400, "bad_request", e.what());
        return error_response(500, "internal", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

// --- HTTP --------------------------------------------------------------------

struct HttpServer::Impl {
    PlayService& service;
    ServerOptions options;
    httplib::Server server;
    std::thread thread;

    Impl(PlayService& s, ServerOptions o) : service(s), options(std::move(o)) {
        auto forward = [this](const httplib::Request& req, httplib::Response& res) {
            const Response r = service.handle(req.method, req.path, req.body);
            res.status = r.status;
            res.set_content(r.body, r.content_type);
        };
        server.Get(R"(/game(/.*)?)", forward);
        server.Post(R"(/game(/.*)?)", forward);
        if (!options.static_dir.empty()) server.set_mount_point("/", options.static_dir);
    }
};

HttpServer::HttpServer(PlayService& service, ServerOptions options) : impl_(std::make_unique<Impl>(service, std::move(options))) {}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::run() { return impl_->server.listen(impl_->options.host, impl_->options.port); }

int HttpServer::start_background() {
    const int port = impl_->server.bind_to_any_port(impl_->options.host);
    if (port < 0) fail(ErrorCode::Io, "cannot bind " + impl_->options.host);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    return port;
}

void HttpServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace qzero::service
