#include "core/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "core/binio.hpp"
#include "core/error.hpp"

namespace qzero {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    fail(ErrorCode::Config, "config key '" + std::string(key) + "': cannot read '" + std::string(value) + "' as " + std::string(expected));
}

double parse_double(std::string_view key, std::string_view v) {
    const std::string s(trim(v));
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d)) bad_value(key, v, "a finite number");
    return d;
}

int64_t parse_int(std::string_view key, std::string_view v) {
    v = trim(v);
    int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        // Accept integral values written in exponent form, e.g. 1e6.
        const double d = parse_double(key, v);
        if (d != std::floor(d) || std::abs(d) > 9.0e18) bad_value(key, v, "an integer");
        return static_cast<int64_t>(d);
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    v = trim(v);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    bad_value(key, v, "a boolean");
}

std::string fmt_double(double d) {
    std::ostringstream os;
    os.precision(17);
    os << d;
    return os.str();
}

struct Field {
    std::function<void(TrainConfig&, std::string_view)> set;
    std::function<std::string(const TrainConfig&)> get;
};

// Ordered key table; to_text() walks it in this order.
const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto num = [&](std::string key, auto member) {
            t.push_back({key, Field{[key, member](TrainConfig& c, std::string_view v) {
                                        using M = std::remove_reference_t<decltype(member(c))>;
                                        if constexpr (std::is_floating_point_v<M>) {
                                            member(c) = parse_double(key, v);
                                        } else {
                                            const int64_t x = parse_int(key, v);
                                            if constexpr (std::is_unsigned_v<M>) {
                                                if (x < 0) bad_value(key, v, "a non-negative integer");
                                            }
                                            member(c) = static_cast<M>(x);
                                        }
                                    },
                                    [member](const TrainConfig& c) {
                                        auto& m = member(const_cast<TrainConfig&>(c));
                                        using M = std::remove_reference_t<decltype(m)>;
                                        if constexpr (std::is_floating_point_v<M>) {
                                            return fmt_double(m);
                                        } else {
                                            return std::to_string(m);
                                        }
                                    }}});
        };
        auto flag = [&](std::string key, auto member) {
            t.push_back({key, Field{[key, member](TrainConfig& c, std::string_view v) { member(c) = parse_bool(key, v); },
                                    [member](const TrainConfig& c) {
                                        return std::string(member(const_cast<TrainConfig&>(c)) ? "true" : "false");
                                    }}});
        };
        auto sched = [&](std::string key, auto member) {
            t.push_back({key, Field{[member](TrainConfig& c, std::string_view v) { member(c) = Schedule::parse(v); },
                                    [member](const TrainConfig& c) { return member(const_cast<TrainConfig&>(c)).to_string(); }}});
        };

        num("board.size", [](TrainConfig& c) -> int& { return c.board.size; });
        num("board.komi", [](TrainConfig& c) -> double& { return c.board.komi; });
        num("board.max_moves", [](TrainConfig& c) -> int& { return c.board.max_moves; });
        flag("board.suicide_allowed", [](TrainConfig& c) -> bool& { return c.board.suicide_allowed; });
        t.push_back({"board.superko",
                     Field{[](TrainConfig& c, std::string_view v) {
                               v = trim(v);
                               if (v == "simple_ko") {
                                   c.board.ko_rule = go::KoRule::Simple;
                               } else if (v == "positional_superko") {
                                   c.board.ko_rule = go::KoRule::PositionalSuperko;
                               } else {
                                   bad_value("board.superko", v, "simple_ko or positional_superko");
                               }
                           },
                           [](const TrainConfig& c) {
                               return std::string(c.board.ko_rule == go::KoRule::Simple ? "simple_ko" : "positional_superko");
                           }}});
        flag("board.shaped_reward", [](TrainConfig& c) -> bool& { return c.board.shaped_reward; });
        flag("board.allow_integer_komi", [](TrainConfig& c) -> bool& { return c.board.allow_integer_komi; });
        num("board.hash_seed", [](TrainConfig& c) -> uint64_t& { return c.board.hash_seed; });

        num("net.blocks", [](TrainConfig& c) -> int& { return c.net.blocks; });
        num("net.filters", [](TrainConfig& c) -> int& { return c.net.filters; });

        num("softq.alpha", [](TrainConfig& c) -> double& { return c.softq.alpha; });
        num("softq.gamma", [](TrainConfig& c) -> double& { return c.softq.gamma; });
        num("softq.min_action_prob", [](TrainConfig& c) -> double& { return c.softq.min_action_prob; });
        flag("softq.entropy_cancellation", [](TrainConfig& c) -> bool& { return c.softq.entropy_cancellation; });
        t.push_back({"softq.anneal",
                     Field{[](TrainConfig& c, std::string_view v) {
                               if (parse_bool("softq.anneal", v)) {
                                   if (!c.softq.anneal) c.softq.anneal = softq::AnnealSchedule{};
                               } else {
                                   c.softq.anneal.reset();
                               }
                           },
                           [](const TrainConfig& c) { return std::string(c.softq.anneal ? "true" : "false"); }}});
        auto anneal = [](TrainConfig& c) -> softq::AnnealSchedule& {
            if (!c.softq.anneal) c.softq.anneal = softq::AnnealSchedule{};
            return *c.softq.anneal;
        };
        // Anneal sub-keys are only emitted when annealing is on; setting one turns it on.
        auto anneal_num = [&](std::string key, auto member) {
            t.push_back({key, Field{[key, member, anneal](TrainConfig& c, std::string_view v) {
                                        using M = std::remove_reference_t<decltype(member(anneal(c)))>;
                                        if constexpr (std::is_floating_point_v<M>) {
                                            member(anneal(c)) = parse_double(key, v);
                                        } else {
                                            member(anneal(c)) = static_cast<M>(parse_int(key, v));
                                        }
                                    },
                                    [member](const TrainConfig& c) -> std::string {
                                        if (!c.softq.anneal) return {};
                                        auto a = *c.softq.anneal;
                                        auto& m = member(a);
                                        using M = std::remove_reference_t<decltype(m)>;
                                        if constexpr (std::is_floating_point_v<M>) {
                                            return fmt_double(m);
                                        } else {
                                            return std::to_string(m);
                                        }
                                    }}});
        };
        anneal_num("softq.anneal.alpha_start", [](softq::AnnealSchedule& a) -> double& { return a.alpha_start; });
        anneal_num("softq.anneal.alpha_end", [](softq::AnnealSchedule& a) -> double& { return a.alpha_end; });
        anneal_num("softq.anneal.horizon_steps", [](softq::AnnealSchedule& a) -> int64_t& { return a.horizon_steps; });
        t.push_back({"softq.anneal.support_sampling",
                     Field{[anneal](TrainConfig& c, std::string_view v) {
                               anneal(c).support_sampling = parse_bool("softq.anneal.support_sampling", v);
                           },
                           [](const TrainConfig& c) -> std::string {
                               if (!c.softq.anneal) return {};
                               return c.softq.anneal->support_sampling ? "true" : "false";
                           }}});

        num("replay_capacity", [](TrainConfig& c) -> size_t& { return c.replay_capacity; });
        num("min_fill", [](TrainConfig& c) -> size_t& { return c.min_fill; });
        num("batch_size", [](TrainConfig& c) -> int& { return c.batch_size; });
        sched("lr_schedule", [](TrainConfig& c) -> Schedule& { return c.lr; });
        sched("rho_schedule", [](TrainConfig& c) -> Schedule& { return c.rho; });
        num("momentum", [](TrainConfig& c) -> double& { return c.momentum; });
        num("l2_c", [](TrainConfig& c) -> double& { return c.l2_c; });
        flag("augment", [](TrainConfig& c) -> bool& { return c.augment; });
        num("ignition_updates", [](TrainConfig& c) -> int64_t& { return c.ignition_updates; });
        num("ignition_min_episodes", [](TrainConfig& c) -> int& { return c.ignition_min_episodes; });
        t.push_back({"mode", Field{[](TrainConfig& c, std::string_view v) {
                                       v = trim(v);
                                       if (v == "sync") {
                                           c.mode = TrainMode::Sync;
                                       } else if (v == "async") {
                                           c.mode = TrainMode::Async;
                                       } else {
                                           bad_value("mode", v, "sync or async");
                                       }
                                   },
                                   [](const TrainConfig& c) { return std::string(c.mode == TrainMode::Sync ? "sync" : "async"); }}});
        num("actor_count", [](TrainConfig& c) -> int& { return c.actor_count; });
        num("sync_env_steps_per_update", [](TrainConfig& c) -> int& { return c.sync_env_steps_per_update; });
        num("publish_every_updates", [](TrainConfig& c) -> int64_t& { return c.publish_every_updates; });
        num("actor_refresh_every_updates", [](TrainConfig& c) -> int64_t& { return c.actor_refresh_every_updates; });
        num("total_updates", [](TrainConfig& c) -> int64_t& { return c.total_updates; });
        num("checkpoint_every", [](TrainConfig& c) -> int64_t& { return c.checkpoint_every; });
        num("seed", [](TrainConfig& c) -> uint64_t& { return c.seed; });
        flag("eval.enabled", [](TrainConfig& c) -> bool& { return c.eval_enabled; });
        num("eval.pool_every_publications", [](TrainConfig& c) -> int64_t& { return c.eval_pool_every_publications; });
        num("eval.matches_per_publication", [](TrainConfig& c) -> int& { return c.eval_matches_per_publication; });
        flag("eval.hsg_cumulative", [](TrainConfig& c) -> bool& { return c.hsg_cumulative; });
        return t;
    }();
    return table;
}

}  // namespace

Schedule::Schedule(std::vector<std::pair<int64_t, double>> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) fail(ErrorCode::Config, "schedule needs at least one step:value pair");
    for (size_t i = 0; i < knots_.size(); ++i) {
        if (!std::isfinite(knots_[i].second)) fail(ErrorCode::Config, "schedule values must be finite");
        if (i > 0 && knots_[i].first < knots_[i - 1].first) fail(ErrorCode::Config, "schedule steps must be non-decreasing");
    }
}

Schedule Schedule::parse(std::string_view text) {
    std::vector<std::pair<int64_t, double>> knots;
    text = trim(text);
    if (text.find(':') == std::string_view::npos) return Schedule(parse_double("schedule", text));
    while (!text.empty()) {
        const size_t comma = text.find(',');
        const std::string_view item = trim(text.substr(0, comma));
        const size_t colon = item.find(':');
        if (colon == std::string_view::npos) bad_value("schedule", item, "step:value");
        knots.push_back({parse_int("schedule", item.substr(0, colon)), parse_double("schedule", item.substr(colon + 1))});
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return Schedule(std::move(knots));
}

std::string Schedule::to_string() const {
    std::string out;
    for (const auto& [step, value] : knots_) {
        if (!out.empty()) out += ",";
        out += std::to_string(step) + ":" + fmt_double(value);
    }
    return out;
}

double Schedule::at(int64_t step) const {
    if (knots_.empty()) fail(ErrorCode::Config, "empty schedule");
    if (step <= knots_.front().first) return knots_.front().second;
    for (size_t i = 1; i < knots_.size(); ++i) {
        const auto& [s1, v1] = knots_[i];
        if (step < s1) {
            const auto& [s0, v0] = knots_[i - 1];
            const double t = static_cast<double>(step - s0) / static_cast<double>(s1 - s0);
            return v0 + (v1 - v0) * t;
        }
    }
    return knots_.back().second;
}

int64_t TrainConfig::resolved_ignition_updates() const {
    if (ignition_updates >= 0) return ignition_updates;
    return total_updates / 50;
}

size_t TrainConfig::resolved_min_fill() const { return min_fill > 0 ? min_fill : 10 * static_cast<size_t>(batch_size); }

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) fail(ErrorCode::Config, what);
    };
    board.validate();
    nn::NetConfig n = net;
    n.board_size = board.size;
    n.validate();
    softq.validate(board.actions());
    require(replay_capacity >= 1, "replay_capacity must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(resolved_min_fill() <= replay_capacity, "min_fill must not exceed replay_capacity");
    for (const auto& [step, v] : lr.knots()) require(v >= 0, "lr_schedule values must be >= 0");
    for (const auto& [step, v] : rho.knots()) require(v >= 0 && v <= 1, "rho_schedule values must lie in [0, 1]");
    require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
    require(l2_c >= 0, "l2_c must be >= 0");
    require(ignition_updates >= -1, "ignition_updates must be >= -1");
    require(ignition_min_episodes >= 0, "ignition_min_episodes must be >= 0");
    require(actor_count >= 1, "actor_count must be >= 1");
    require(sync_env_steps_per_update >= 1, "sync_env_steps_per_update must be >= 1");
    require(publish_every_updates >= 1, "publish_every_updates must be >= 1");
    require(actor_refresh_every_updates >= 1, "actor_refresh_every_updates must be >= 1");
    require(total_updates >= 0, "total_updates must be >= 0");
    require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
    require(eval_pool_every_publications >= 1, "eval.pool_every_publications must be >= 1");
    require(eval_matches_per_publication >= 0, "eval.matches_per_publication must be >= 0");
    require(mode == TrainMode::Async || actor_count == 1, "sync mode runs exactly one actor");
}

void TrainConfig::set(std::string_view key, std::string_view value) {
    key = trim(key);
    for (const auto& [name, field] : fields()) {
        if (name == key) {
            field.set(*this, value);
            net.board_size = board.size;
            return;
        }
    }
    fail(ErrorCode::Config, "unknown config key '" + std::string(key) + "'");
}

std::string TrainConfig::to_text() const {
    std::string out;
    for (const auto& [name, field] : fields()) {
        const std::string v = field.get(*this);
        if (v.empty()) continue;
        out += name + " = " + v + "\n";
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_assignments(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        const size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail(ErrorCode::Config, "config line " + std::to_string(line_no) + ": expected key = value, got '" + std::string(line) + "'");
        }
        out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return out;
}

TrainConfig TrainConfig::parse(std::string_view text) {
    TrainConfig c;
    for (const auto& [k, v] : parse_assignments(text)) c.set(k, v);
    c.net.board_size = c.board.size;
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) { return parse(read_file(path)); }

void apply_overrides(TrainConfig& config, std::string_view text) {
    for (const auto& [k, v] : parse_assignments(text)) config.set(k, v);
}

}  // namespace qzero
