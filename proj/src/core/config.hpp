#pragma once

// Training configuration and its key = value text form.
//
// Every field has exactly one key. Files hold `key = value` lines; `#` starts
// a comment. Overrides use the same syntax and are applied after the file.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core/go_engine.hpp"
#include "core/network.hpp"
#include "core/soft_q.hpp"

namespace qzero {

/// Piecewise-linear in the update step through (step, value) knots, constant
/// outside them. Text form: `0:5e-5, 20000:4e-6`.
class Schedule {
public:
    Schedule() = default;
    explicit Schedule(double constant) : knots_{{0, constant}} {}
    explicit Schedule(std::vector<std::pair<int64_t, double>> knots);

    static Schedule parse(std::string_view text);
    std::string to_string() const;

    double at(int64_t step) const;
    const std::vector<std::pair<int64_t, double>>& knots() const { return knots_; }
    bool operator==(const Schedule&) const = default;

private:
    std::vector<std::pair<int64_t, double>> knots_;
};

enum class TrainMode : uint8_t { Sync, Async };

struct TrainConfig {
    go::BoardConfig board;
    nn::NetConfig net;  // board_size follows board.size
    softq::SoftQConfig softq;

    size_t replay_capacity = 1000000;
    size_t min_fill = 0;  // 0 selects 10 * batch_size
    int batch_size = 256;
    Schedule lr{5e-5};
    Schedule rho{0.995};
    double momentum = 0.9;
    double l2_c = 1e-6;
    bool augment = true;

    int64_t ignition_updates = -1;  // -1 selects 2% of total_updates
    int ignition_min_episodes = 16;

    TrainMode mode = TrainMode::Sync;
    int actor_count = 1;
    int sync_env_steps_per_update = 16;
    int64_t publish_every_updates = 10;
    int64_t actor_refresh_every_updates = 10;
    int64_t total_updates = 1000;
    int64_t checkpoint_every = 1000;
    uint64_t seed = 1;

    bool eval_enabled = true;
    int64_t eval_pool_every_publications = 1;
    int eval_matches_per_publication = 2;
    bool hsg_cumulative = false;

    int64_t resolved_ignition_updates() const;
    size_t resolved_min_fill() const;

    /// Throws Error(Config) naming the offending key.
    void validate() const;

    /// Applies one `key = value` assignment. Throws Error(Config) for unknown keys or bad values.
    void set(std::string_view key, std::string_view value);

    /// Canonical text form, one line per key in a fixed order.
    std::string to_text() const;

    static TrainConfig parse(std::string_view text);
    static TrainConfig load(const std::string& path);
};

/// Applies newline- or comma-free `key=value` lines in order.
void apply_overrides(TrainConfig& config, std::string_view text);

/// Parses `key = value` lines into pairs, skipping blanks and `#` comments.
std::vector<std::pair<std::string, std::string>> parse_assignments(std::string_view text);

}  // namespace qzero
