// qzero command line front end. Talks to the library through the C API only.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qzero/qzero.h"

namespace {

int report(qz_status s) {
    if (s == QZ_OK) return 0;
    std::fprintf(stderr, "qzero: %s: %s\n", qz_status_name(s), qz_last_error());
    return 1;
}

std::string take(char* s) {
    std::string out = s ? s : "";
    qz_string_free(s);
    return out;
}

void print_line(const char* line, void* user) {
    const auto every = *static_cast<long long*>(user);
    const long long step = std::atoll(line);
    if (every > 0 && step % every == 0) {
        std::printf("%s\n", line);
        std::fflush(stdout);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qzero: self-play soft Q-learning for Go"};
    app.require_subcommand(1);
    app.set_version_flag("--version", qz_version());

    // train
    auto* train = app.add_subcommand("train", "Run self-play training from a config file");
    std::string config_path, out_dir = "run", resume;
    std::vector<std::string> sets;
    long long print_every = 100;
    bool print_config = false;
    train->add_option("config", config_path, "key = value config file")->check(CLI::ExistingFile);
    train->add_option("-o,--out", out_dir, "Output directory for logs and checkpoints");
    train->add_option("--set", sets, "Override one config key (key=value); repeatable");
    train->add_option("--resume", resume, "Checkpoint directory to resume from")->check(CLI::ExistingDirectory);
    train->add_option("--print-every", print_every, "Echo every n-th log line (0 silences)");
    train->add_flag("--print-config", print_config, "Print the effective config and exit");

    // eval plot
    auto* evalc = app.add_subcommand("eval", "Evaluation utilities");
    evalc->require_subcommand(1);
    auto* plot = evalc->add_subcommand("plot", "Render an HSG log as an SVG chart");
    std::string hsg_log, svg_out, title = "History Score Gain";
    plot->add_option("log", hsg_log, "hsg.csv written by train")->required()->check(CLI::ExistingFile);
    plot->add_option("-o,--out", svg_out, "Output SVG (default: <log>.svg)");
    plot->add_option("--title", title, "Chart title");

    // match
    auto* match = app.add_subcommand("match", "Play games between two checkpoints (or 'random')");
    std::string player_a, player_b, mode = "argmax", record_dir;
    int games = 10;
    double alpha = 0.081, komi = 7.5;
    uint64_t seed = 1;
    match->add_option("a", player_a, "Checkpoint directory, parameter file, or 'random'")->required();
    match->add_option("b", player_b, "Checkpoint directory, parameter file, or 'random'")->required();
    match->add_option("--games", games, "Number of games; colours alternate")->check(CLI::PositiveNumber);
    match->add_option("--mode", mode, "argmax or sampling")->check(CLI::IsMember({"argmax", "sampling"}));
    match->add_option("--alpha", alpha, "Sampling temperature");
    match->add_option("--komi", komi, "Komi");
    match->add_option("--seed", seed, "Random seed");
    match->add_option("--records", record_dir, "Write a record file per game into this directory");

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the HTTP/JSON play API");
    std::string ckpt, host = "127.0.0.1", static_dir;
    int port = 8080;
    double alpha_display = 0.081;
    serve->add_option("checkpoint", ckpt, "Checkpoint directory or parameter file")->required();
    serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--static", static_dir, "Directory of static files served at /");
    serve->add_option("--komi", komi, "Komi for new games");
    serve->add_option("--alpha", alpha_display, "Temperature of the policy overlay");

    // export-sgf
    auto* sgf = app.add_subcommand("export-sgf", "Convert a game record to SGF");
    std::string record, sgf_out;
    sgf->add_option("game", record, "Record file (from match --records)")->required()->check(CLI::ExistingFile);
    sgf->add_option("-o,--out", sgf_out, "Output file (default: stdout)");

    // bench
    auto* bench = app.add_subcommand("bench", "Measure environment steps/sec and inferences/sec");
    int size = 9, blocks = 4, filters = 32, batch = 32;
    double seconds = 4.0;
    bench->add_option("--size", size, "Board size");
    bench->add_option("--blocks", blocks, "Residual blocks");
    bench->add_option("--filters", filters, "Filters per convolution");
    bench->add_option("--batch", batch, "Inference batch size");
    bench->add_option("--seconds", seconds, "Total measuring time");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) {
        std::string overrides;
        for (const auto& s : sets) overrides += s + "\n";
        if (config_path.empty() && resume.empty()) {
            std::fprintf(stderr, "qzero: train needs a config file or --resume\n");
            return 2;
        }
        if (print_config) {
            char* text = nullptr;
            if (int rc = report(qz_config_text(config_path.c_str(), overrides.c_str(), &text))) return rc;
            std::fputs(take(text).c_str(), stdout);
            return 0;
        }
        char* summary = nullptr;
        const qz_status s = qz_train(config_path.empty() ? nullptr : config_path.c_str(), overrides.c_str(), out_dir.c_str(),
                                     resume.empty() ? nullptr : resume.c_str(), print_line, &print_every, &summary);
        if (int rc = report(s)) return rc;
        std::printf("%s\n", take(summary).c_str());
        return 0;
    }
    if (plot->parsed()) {
        if (svg_out.empty()) svg_out = hsg_log + ".svg";
        if (int rc = report(qz_plot_hsg(hsg_log.c_str(), svg_out.c_str(), title.c_str()))) return rc;
        std::printf("wrote %s\n", svg_out.c_str());
        return 0;
    }
    if (match->parsed()) {
        char* result = nullptr;
        const qz_status s = qz_match(player_a.c_str(), player_b.c_str(), games, mode == "sampling" ? QZ_MODE_SAMPLING : QZ_MODE_ARGMAX,
                                     alpha, komi, seed, record_dir.empty() ? nullptr : record_dir.c_str(), &result);
        if (int rc = report(s)) return rc;
        const auto j = nlohmann::json::parse(take(result));
        std::printf("games %d  A wins %d  B wins %d  A win rate %.3f\n", j["games"].get<int>(), j["a_wins"].get<int>(),
                    j["b_wins"].get<int>(), j["a_win_rate"].get<double>());
        return 0;
    }
    if (serve->parsed()) {
        qz_service* svc = nullptr;
        if (int rc = report(qz_service_new(ckpt.c_str(), komi, alpha_display, seed, &svc))) return rc;
        std::printf("serving on http://%s:%d\n", host.c_str(), port);
        std::fflush(stdout);
        const qz_status s = qz_serve(svc, host.c_str(), port, static_dir.empty() ? nullptr : static_dir.c_str());
        qz_service_free(svc);
        return report(s);
    }
    if (sgf->parsed()) {
        char* text = nullptr;
        if (int rc = report(qz_export_sgf(record.c_str(), &text))) return rc;
        const std::string out = take(text);
        if (sgf_out.empty()) {
            std::fputs(out.c_str(), stdout);
        } else {
            std::ofstream f(sgf_out, std::ios::binary);
            f << out;
            if (!f) {
                std::fprintf(stderr, "qzero: i/o error: cannot write %s\n", sgf_out.c_str());
                return 1;
            }
        }
        return 0;
    }
    if (bench->parsed()) {
        char* result = nullptr;
        if (int rc = report(qz_bench(size, blocks, filters, batch, seconds, &result))) return rc;
        const auto j = nlohmann::json::parse(take(result));
        std::printf("board %dx%d, net %dx%d, batch %d\n", size, size, blocks, filters, batch);
        std::printf("environment steps/sec  %.0f\n", j["env_steps_per_sec"].get<double>());
        std::printf("inferences/sec         %.0f\n", j["inferences_per_sec"].get<double>());
        return 0;
    }
    return 0;
}
