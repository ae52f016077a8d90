#include "qzero/qzero.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/evaluation.hpp"
#include "core/go_engine.hpp"
#include "core/network.hpp"
#include "core/pipeline.hpp"
#include "service/play_service.hpp"

using namespace qzero;
using json = nlohmann::json;
namespace fs = std::filesystem;

struct qz_game {
    go::GameState state;
};

struct qz_net {
    pipeline::ParamsPtr params;
    nn::Workspace<float> ws;
    std::vector<float> q;
};

struct qz_service {
    std::unique_ptr<service::PlayService> service;
};

namespace {

thread_local std::string g_last_error;

qz_status to_status(ErrorCode c) {
    switch (c) {
        case ErrorCode::InvalidArgument: return QZ_ERR_INVALID_ARGUMENT;
        case ErrorCode::IllegalMove: return QZ_ERR_ILLEGAL_MOVE;
        case ErrorCode::Io: return QZ_ERR_IO;
        case ErrorCode::Corrupt: return QZ_ERR_CORRUPT;
        case ErrorCode::Config: return QZ_ERR_CONFIG;
        case ErrorCode::NotFound: return QZ_ERR_NOT_FOUND;
        case ErrorCode::NotReady: return QZ_ERR_NOT_READY;
        case ErrorCode::NonFinite: return QZ_ERR_NON_FINITE;
        case ErrorCode::Internal: return QZ_ERR_INTERNAL;
    }
    return QZ_ERR_INTERNAL;
}

template <typename F>
qz_status guarded(F&& f) {
    g_last_error.clear();
    try {
        f();
        return QZ_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return QZ_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return QZ_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

nn::Parameters load_params(const std::string& path) {
    if (fs::is_directory(path)) {
        const auto target = fs::path(path) / "target.bin";
        if (!fs::exists(target)) fail(ErrorCode::Io, "checkpoint directory " + path + " has no target.bin");
        return nn::load(target.string());
    }
    return nn::load(path);
}

TrainConfig effective_config(const char* config_path, const char* overrides) {
    TrainConfig c = config_path && *config_path ? TrainConfig::load(config_path) : TrainConfig{};
    if (overrides) apply_overrides(c, overrides);
    c.net.board_size = c.board.size;
    return c;
}

std::unique_ptr<eval::Player> make_player(const std::string& spec, qz_play_mode mode, double alpha, int* board_size) {
    if (spec == "random") return std::make_unique<eval::RandomPlayer>(0.0);
    auto params = std::make_shared<nn::Parameters>(load_params(spec));
    if (*board_size == 0) {
        *board_size = params->config.board_size;
    } else if (*board_size != params->config.board_size) {
        fail(ErrorCode::Config, "players were trained for different board sizes");
    }
    return std::make_unique<eval::NetPlayer>(params, mode == QZ_MODE_SAMPLING ? eval::PlayMode::Sampling : eval::PlayMode::Argmax,
                                             alpha);
}

}  // namespace

extern "C" {

const char* qz_version(void) { return "0.1.0"; }

const char* qz_last_error(void) { return g_last_error.c_str(); }

const char* qz_status_name(qz_status s) {
    switch (s) {
        case QZ_OK: return "ok";
        case QZ_ERR_INVALID_ARGUMENT: return "invalid argument";
        case QZ_ERR_ILLEGAL_MOVE: return "illegal move";
        case QZ_ERR_IO: return "i/o error";
        case QZ_ERR_CORRUPT: return "corrupt data";
        case QZ_ERR_CONFIG: return "configuration error";
        case QZ_ERR_NOT_FOUND: return "not found";
        case QZ_ERR_NOT_READY: return "not ready";
        case QZ_ERR_NON_FINITE: return "non-finite value";
        case QZ_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

void qz_string_free(char* s) { std::free(s); }

// --- games ---------------------------------------------------------------------

qz_status qz_game_new(int size, double komi, qz_game** out) {
    return guarded([&] {
        require(out, "out");
        go::BoardConfig c;
        c.size = size;
        c.komi = komi;
        c.validate();
        *out = new qz_game{go::new_game(c)};
    });
}

void qz_game_free(qz_game* game) { delete game; }

qz_status qz_game_action_count(const qz_game* game, int* out) {
    return guarded([&] {
        require(game, "game");
        require(out, "out");
        *out = game->state.config.actions();
    });
}

qz_status qz_game_play(qz_game* game, int action, double* reward, int* done) {
    return guarded([&] {
        require(game, "game");
        const auto r = go::step(game->state, action);
        game->state = r.state;
        if (reward) *reward = r.reward;
        if (done) *done = r.done;
    });
}

qz_status qz_game_legal_mask(const qz_game* game, uint8_t* out, size_t len) {
    return guarded([&] {
        require(game, "game");
        require(out, "out");
        if (len != static_cast<size_t>(game->state.config.actions())) fail(ErrorCode::InvalidArgument, "mask length must be size*size+1");
        go::legal_mask_into(game->state, std::span<uint8_t>(out, len));
    });
}

qz_status qz_game_is_terminal(const qz_game* game, int* out) {
    return guarded([&] {
        require(game, "game");
        require(out, "out");
        *out = game->state.terminal ? 1 : 0;
    });
}

qz_status qz_game_to_move(const qz_game* game, int* out) {
    return guarded([&] {
        require(game, "game");
        require(out, "out");
        *out = static_cast<int>(game->state.to_move);
    });
}

qz_status qz_game_score(const qz_game* game, double* out) {
    return guarded([&] {
        require(game, "game");
        require(out, "out");
        *out = go::score(game->state).score;
    });
}

qz_status qz_game_dump(const qz_game* game, char** out) {
    return guarded([&] {
        require(game, "game");
        require(out, "out");
        *out = dup(go::dump(game->state));
    });
}

// --- networks ------------------------------------------------------------------

qz_status qz_net_load(const char* path, qz_net** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto net = std::make_unique<qz_net>();
        net->params = std::make_shared<nn::Parameters>(load_params(path));
        *out = net.release();
    });
}

void qz_net_free(qz_net* net) { delete net; }

qz_status qz_net_board_size(const qz_net* net, int* out) {
    return guarded([&] {
        require(net, "net");
        require(out, "out");
        *out = net->params->config.board_size;
    });
}

qz_status qz_net_q_values(qz_net* net, const qz_game* game, float* out, size_t len) {
    return guarded([&] {
        require(net, "net");
        require(game, "game");
        require(out, "out");
        if (game->state.config.size != net->params->config.board_size) fail(ErrorCode::Config, "board size does not match the network");
        if (len != static_cast<size_t>(game->state.config.actions())) fail(ErrorCode::InvalidArgument, "output length must be size*size+1");
        nn::InputBatch in;
        in.board_size = game->state.config.size;
        in.push(go::features(game->state));
        net->ws.forward(*net->params, in, net->q);
        std::memcpy(out, net->q.data(), len * sizeof(float));
    });
}

// --- training ------------------------------------------------------------------

qz_status qz_config_text(const char* config_path, const char* overrides, char** out) {
    return guarded([&] {
        require(out, "out");
        *out = dup(effective_config(config_path, overrides).to_text());
    });
}

qz_status qz_train(const char* config_path, const char* overrides, const char* out_dir, const char* resume_from,
                   qz_progress_fn progress, void* user, char** summary_json) {
    return guarded([&] {
        require(out_dir, "out_dir");
        TrainConfig c;
        if (resume_from && *resume_from && !(config_path && *config_path)) {
            c = pipeline::checkpoint_config(resume_from);
            if (overrides) apply_overrides(c, overrides);
        } else {
            c = effective_config(config_path, overrides);
        }
        pipeline::TrainOptions o;
        o.out_dir = out_dir;
        if (resume_from) o.resume_from = resume_from;
        if (progress) {
            o.on_update = [progress, user](const pipeline::UpdateStats& s) { progress(pipeline::log_line(s).c_str(), user); };
        }
        const auto sum = pipeline::run_training(c, o);
        if (summary_json) {
            *summary_json = dup(json{{"updates", sum.updates},
                                     {"episodes", sum.episodes},
                                     {"publications", sum.publications},
                                     {"final_checkpoint", sum.final_checkpoint},
                                     {"log", sum.log_path},
                                     {"hsg_log", sum.hsg_path}}
                                    .dump());
        }
    });
}

// --- evaluation ----------------------------------------------------------------

qz_status qz_match(const char* player_a, const char* player_b, int games, qz_play_mode mode, double alpha, double komi,
                   uint64_t seed, const char* record_dir, char** result_json) {
    return guarded([&] {
        require(player_a, "player_a");
        require(player_b, "player_b");
        if (games < 1) fail(ErrorCode::InvalidArgument, "games must be >= 1");
        if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be positive");
        int size = 0;
        auto a = make_player(player_a, mode, alpha, &size);
        auto b = make_player(player_b, mode, alpha, &size);
        if (size == 0) fail(ErrorCode::InvalidArgument, "at least one player must be a network");
        go::BoardConfig board;
        board.size = size;
        board.komi = komi;
        board.validate();
        const auto summary = eval::play_matches(*a, *b, board, games, seed);
        if (record_dir) {
            fs::create_directories(record_dir);
            for (size_t i = 0; i < summary.results.size(); ++i) {
                const auto path = fs::path(record_dir) / ("game_" + std::to_string(i) + ".txt");
                write_file(path.string(), go::format_record(summary.results[i].record));
            }
        }
        if (result_json) {
            json games_json = json::array();
            for (const auto& r : summary.results) {
                games_json.push_back(json{{"a_black", r.a_black},
                                          {"winner", r.winner == eval::Side::A ? "A" : "B"},
                                          {"score_a", r.score},
                                          {"moves", r.move_count}});
            }
            *result_json = dup(json{{"games", summary.games},
                                    {"a_wins", summary.a_wins},
                                    {"b_wins", summary.b_wins},
                                    {"a_black_games", summary.a_black_games},
                                    {"a_win_rate", summary.a_win_rate()},
                                    {"results", games_json}}
                                   .dump());
        }
    });
}

qz_status qz_plot_hsg(const char* hsg_log_path, const char* svg_path, const char* title) {
    return guarded([&] {
        require(hsg_log_path, "hsg_log_path");
        require(svg_path, "svg_path");
        const auto points = eval::parse_hsg_log(read_file(hsg_log_path));
        write_file(svg_path, eval::render_hsg_svg(points, title ? title : "History Score Gain"));
    });
}

qz_status qz_export_sgf(const char* record_path, char** sgf) {
    return guarded([&] {
        require(record_path, "record_path");
        require(sgf, "sgf");
        *sgf = dup(go::to_sgf(go::parse_record(read_file(record_path))));
    });
}

qz_status qz_bench(int size, int blocks, int filters, int batch, double seconds, char** result_json) {
    return guarded([&] {
        require(result_json, "result_json");
        if (!(seconds > 0.0) || batch < 1) fail(ErrorCode::InvalidArgument, "seconds and batch must be positive");
        go::BoardConfig board;
        board.size = size;
        board.validate();
        nn::NetConfig nc;
        nc.board_size = size;
        nc.blocks = blocks;
        nc.filters = filters;
        nc.validate();
        using clock = std::chrono::steady_clock;
        const double half = seconds / 2.0;

        Rng rng(1);
        int64_t steps = 0;
        auto t0 = clock::now();
        go::GameState s = go::new_game(board);
        std::vector<uint8_t> mask(board.actions());
        std::vector<int> legal;
        while (std::chrono::duration<double>(clock::now() - t0).count() < half) {
            for (int k = 0; k < 256; ++k) {
                if (s.terminal) s = go::new_game(board);
                go::legal_mask_into(s, mask);
                legal.clear();
                for (int a = 0; a < board.actions(); ++a) {
                    if (mask[a]) legal.push_back(a);
                }
                go::play(s, legal[rng.below(legal.size())]);
                ++steps;
            }
        }
        const double env_secs = std::chrono::duration<double>(clock::now() - t0).count();

        const auto params = nn::init<float>(nc, 1);
        nn::Workspace<float> ws;
        nn::InputBatch in;
        in.board_size = size;
        const auto f = go::features(go::new_game(board));
        for (int i = 0; i < batch; ++i) in.push(f);
        std::vector<float> q;
        int64_t inferences = 0;
        t0 = clock::now();
        while (std::chrono::duration<double>(clock::now() - t0).count() < half) {
            ws.forward(params, in, q);
            inferences += batch;
        }
        const double net_secs = std::chrono::duration<double>(clock::now() - t0).count();
        *result_json = dup(json{{"board_size", size},
                                {"blocks", blocks},
                                {"filters", filters},
                                {"batch", batch},
                                {"env_steps_per_sec", static_cast<double>(steps) / env_secs},
                                {"inferences_per_sec", static_cast<double>(inferences) / net_secs}}
                               .dump());
    });
}

// --- play service --------------------------------------------------------------

qz_status qz_service_new(const char* checkpoint, double komi, double alpha_display, uint64_t seed, qz_service** out) {
    return guarded([&] {
        require(checkpoint, "checkpoint");
        require(out, "out");
        service::ServiceConfig sc;
        sc.komi = komi;
        sc.alpha_display = alpha_display;
        sc.seed = seed;
        auto params = std::make_shared<nn::Parameters>(load_params(checkpoint));
        auto s = std::make_unique<qz_service>();
        s->service = std::make_unique<service::PlayService>(params, sc);
        *out = s.release();
    });
}

void qz_service_free(qz_service* s) { delete s; }

qz_status qz_service_handle(qz_service* s, const char* method, const char* path, const char* body, int* http_status,
                            char** content_type, char** response_body) {
    return guarded([&] {
        require(s, "service");
        require(method, "method");
        require(path, "path");
        require(http_status, "http_status");
        require(response_body, "response_body");
        const auto r = s->service->handle(method, path, body ? body : "");
        *http_status = r.status;
        if (content_type) *content_type = dup(r.content_type);
        *response_body = dup(r.body);
    });
}

qz_status qz_serve(qz_service* s, const char* host, int port, const char* static_dir) {
    return guarded([&] {
        require(s, "service");
        service::ServerOptions o;
        if (host) o.host = host;
        o.port = port;
        if (static_dir) {
            if (!fs::is_directory(static_dir)) fail(ErrorCode::Io, std::string("static directory not found: ") + static_dir);
            o.static_dir = static_dir;
        }
        service::HttpServer server(*s->service, o);
        if (!server.run()) fail(ErrorCode::Io, "cannot listen on " + o.host + ":" + std::to_string(port));
    });
}

}  // extern "C"
