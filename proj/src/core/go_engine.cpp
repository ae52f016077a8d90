#include "core/go_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace qzero::go {

namespace {

template <typename F>
inline void for_each_neighbor(int p, int n, F&& f) {
    const int r = p / n;
    const int c = p % n;
    if (r > 0) f(p - n);
    if (r < n - 1) f(p + n);
    if (c > 0) f(p - 1);
    if (c < n - 1) f(p + 1);
}

// Generation-stamped visit marks so flood fills never clear a buffer.
struct Marks {
    std::array<uint32_t, kMaxPoints> stamp{};
    uint32_t generation = 0;

    uint32_t next() {
        if (++generation == 0) {
            stamp.fill(0);
            generation = 1;
        }
        return generation;
    }
};

thread_local Marks g_marks;

// True when the group containing `start` touches an empty point other than `except`.
bool group_has_liberty(const GameState& s, int start, int except = -1) {
    const int n = s.config.size;
    const Stone colour = s.stones[start];
    const uint32_t gen = g_marks.next();
    std::array<int16_t, kMaxPoints> stack;
    int top = 0;
    stack[top++] = static_cast<int16_t>(start);
    g_marks.stamp[start] = gen;
    while (top > 0) {
        const int p = stack[--top];
        bool found = false;
        for_each_neighbor(p, n, [&](int q) {
            if (found) return;
            const Stone st = s.stones[q];
            if (st == Stone::Empty) {
                if (q != except) found = true;
            } else if (st == colour && g_marks.stamp[q] != gen) {
                g_marks.stamp[q] = gen;
                stack[top++] = static_cast<int16_t>(q);
            }
        });
        if (found) return true;
    }
    return false;
}

int remove_group(GameState& s, int start) {
    const int n = s.config.size;
    const Stone colour = s.stones[start];
    std::array<int16_t, kMaxPoints> stack;
    int top = 0;
    int removed = 0;
    stack[top++] = static_cast<int16_t>(start);
    s.stones[start] = Stone::Empty;
    s.hash ^= zobrist_key(s.config.hash_seed, start, colour);
    while (top > 0) {
        const int p = stack[--top];
        ++removed;
        for_each_neighbor(p, n, [&](int q) {
            if (s.stones[q] == colour) {
                s.stones[q] = Stone::Empty;
                s.hash ^= zobrist_key(s.config.hash_seed, q, colour);
                stack[top++] = static_cast<int16_t>(q);
            }
        });
    }
    return removed;
}

bool seen_position(const GameState& s, uint64_t h) {
    return std::binary_search(s.position_history.begin(), s.position_history.end(), h);
}

void remember_position(GameState& s) {
    auto it = std::lower_bound(s.position_history.begin(), s.position_history.end(), s.hash);
    if (it == s.position_history.end() || *it != s.hash) s.position_history.insert(it, s.hash);
}

// Rules that do not need a trial placement: range, occupancy, ko, suicide.
MoveError check_local(const GameState& s, int a) {
    if (s.terminal) return MoveError::Terminal;
    const int n = s.config.size;
    if (a < 0 || a > n * n) return MoveError::OutOfRange;
    if (a == n * n) return MoveError::None;
    if (s.stones[a] != Stone::Empty) return MoveError::Occupied;
    if (a == s.ko_point) return MoveError::Ko;
    const Stone me = s.to_move;
    bool ok = false;
    for_each_neighbor(a, n, [&](int q) {
        if (ok) return;
        const Stone st = s.stones[q];
        if (st == Stone::Empty) {
            ok = true;
        } else if (st == me) {
            ok = group_has_liberty(s, q, a);
        } else {
            ok = !group_has_liberty(s, q, a);
        }
    });
    if (!ok && !s.config.suicide_allowed) return MoveError::Suicide;
    return MoveError::None;
}

// Applies a move already known to satisfy check_local.
void apply_unchecked(GameState& s, int a) {
    const int n = s.config.size;
    const Stone me = s.to_move;
    const Stone opp = opponent(me);
    if (a == n * n) {
        ++s.consecutive_passes;
        s.ko_point = -1;
    } else {
        s.stones[a] = me;
        s.hash ^= zobrist_key(s.config.hash_seed, a, me);
        int captured = 0;
        int last_captured = -1;
        for_each_neighbor(a, n, [&](int q) {
            if (s.stones[q] == opp && !group_has_liberty(s, q)) {
                captured += remove_group(s, q);
                last_captured = q;
            }
        });
        if (!group_has_liberty(s, a)) remove_group(s, a);

        s.ko_point = -1;
        if (captured == 1 && s.stones[a] == me) {
            int friends = 0;
            int liberties = 0;
            for_each_neighbor(a, n, [&](int q) {
                if (s.stones[q] == me) ++friends;
                if (s.stones[q] == Stone::Empty) ++liberties;
            });
            if (friends == 0 && liberties == 1) s.ko_point = last_captured;
        }
        s.consecutive_passes = 0;
        if (s.config.ko_rule == KoRule::PositionalSuperko) remember_position(s);
    }
    ++s.move_count;
    s.to_move = opp;
    if (s.consecutive_passes >= 2 || s.move_count >= s.config.move_cap()) {
        s.terminal = true;
        s.ko_point = -1;
    }
}

}  // namespace

void BoardConfig::validate() const {
    const int min_size = allow_tiny_board ? kTinySize : kMinSize;
    if (size < min_size || size > kMaxSize) {
        fail(ErrorCode::Config, "board size " + std::to_string(size) + " outside [" + std::to_string(min_size) + ", " +
                                    std::to_string(kMaxSize) + "]");
    }
    if (!std::isfinite(komi)) fail(ErrorCode::Config, "komi must be finite");
    if (!allow_integer_komi && komi == std::floor(komi)) {
        fail(ErrorCode::Config, "komi must have a fractional part (set allow_integer_komi to override)");
    }
    if (move_cap() < 2) fail(ErrorCode::Config, "max_moves must be at least 2");
}

const char* to_string(MoveError e) {
    switch (e) {
        case MoveError::None: return "ok";
        case MoveError::Occupied: return "occupied";
        case MoveError::Ko: return "ko";
        case MoveError::Suicide: return "suicide";
        case MoveError::Superko: return "superko";
        case MoveError::Terminal: return "terminal";
        case MoveError::OutOfRange: return "out_of_range";
    }
    return "unknown";
}

uint64_t zobrist_key(uint64_t seed, int point, Stone colour) {
    return splitmix64(seed + static_cast<uint64_t>(2 * point + static_cast<int>(colour)) * 0xD1B54A32D192ED03ULL);
}

GameState new_game(const BoardConfig& config) {
    config.validate();
    GameState s;
    s.config = config;
    if (config.ko_rule == KoRule::PositionalSuperko) s.position_history.push_back(s.hash);
    return s;
}

MoveError check_move(const GameState& state, int action) {
    const MoveError local = check_local(state, action);
    if (local != MoveError::None) return local;
    if (state.config.ko_rule == KoRule::PositionalSuperko && action != state.config.pass()) {
        GameState trial = state;
        apply_unchecked(trial, action);
        if (seen_position(state, trial.hash)) return MoveError::Superko;
    }
    return MoveError::None;
}

void legal_mask_into(const GameState& s, std::span<uint8_t> out) {
    const int n = s.config.size;
    const int points = n * n;
    if (s.terminal) fail(ErrorCode::InvalidArgument, "legal_mask: state is terminal");
    if (out.size() != static_cast<size_t>(points + 1)) fail(ErrorCode::InvalidArgument, "legal_mask: output length must be N*N+1");

    // Label every group once and count its distinct liberties.
    std::array<int16_t, kMaxPoints> group;
    group.fill(-1);
    std::array<int16_t, kMaxPoints> liberties;
    std::array<int16_t, kMaxPoints> stack;
    int groups = 0;
    for (int p = 0; p < points; ++p) {
        if (s.stones[p] == Stone::Empty || group[p] >= 0) continue;
        const Stone colour = s.stones[p];
        const uint32_t gen = g_marks.next();
        int libs = 0;
        int top = 0;
        stack[top++] = static_cast<int16_t>(p);
        group[p] = static_cast<int16_t>(groups);
        while (top > 0) {
            const int x = stack[--top];
            for_each_neighbor(x, n, [&](int q) {
                const Stone st = s.stones[q];
                if (st == Stone::Empty) {
                    if (g_marks.stamp[q] != gen) {
                        g_marks.stamp[q] = gen;
                        ++libs;
                    }
                } else if (st == colour && group[q] < 0) {
                    group[q] = static_cast<int16_t>(groups);
                    stack[top++] = static_cast<int16_t>(q);
                }
            });
        }
        liberties[groups++] = static_cast<int16_t>(libs);
    }

    const Stone me = s.to_move;
    const bool superko = s.config.ko_rule == KoRule::PositionalSuperko;
    for (int p = 0; p < points; ++p) {
        if (s.stones[p] != Stone::Empty || p == s.ko_point) {
            out[p] = 0;
            continue;
        }
        bool ok = false;
        for_each_neighbor(p, n, [&](int q) {
            const Stone st = s.stones[q];
            if (st == Stone::Empty) {
                ok = true;
            } else if (st == me) {
                ok = ok || liberties[group[q]] >= 2;
            } else {
                ok = ok || liberties[group[q]] == 1;
            }
        });
        ok = ok || s.config.suicide_allowed;
        if (ok && superko) {
            GameState trial = s;
            apply_unchecked(trial, p);
            ok = !seen_position(s, trial.hash);
        }
        out[p] = ok ? 1 : 0;
    }
    out[points] = 1;
}

std::vector<uint8_t> legal_mask(const GameState& state) {
    std::vector<uint8_t> mask(state.config.actions());
    legal_mask_into(state, mask);
    return mask;
}

MoveError play(GameState& state, int action, double* reward, int* done) {
    const MoveError err = check_move(state, action);
    if (err != MoveError::None) return err;
    const Stone mover = state.to_move;
    apply_unchecked(state, action);
    double r = 0.0;
    if (state.terminal) {
        const double black = terminal_reward(state.config, score(state).score);
        r = mover == Stone::Black ? black : -black;
    }
    if (reward) *reward = r;
    if (done) *done = state.terminal ? 1 : 0;
    return MoveError::None;
}

StepResult step(const GameState& state, int action) {
    StepResult out{state, 0.0, 0};
    const MoveError err = play(out.state, action, &out.reward, &out.done);
    if (err != MoveError::None) {
        fail(ErrorCode::IllegalMove, std::string("illegal move ") + std::to_string(action) + ": " + to_string(err));
    }
    return out;
}

ScoreResult score(const GameState& s) {
    const int n = s.config.size;
    const int points = n * n;
    ScoreResult result;
    std::array<uint8_t, kMaxPoints> visited{};
    std::array<int16_t, kMaxPoints> stack;
    for (int p = 0; p < points; ++p) {
        const Stone st = s.stones[p];
        if (st == Stone::Black) {
            result.area_black += 1;
        } else if (st == Stone::White) {
            result.area_white += 1;
        } else if (!visited[p]) {
            int region = 0;
            bool touches_black = false;
            bool touches_white = false;
            int top = 0;
            stack[top++] = static_cast<int16_t>(p);
            visited[p] = 1;
            while (top > 0) {
                const int x = stack[--top];
                ++region;
                for_each_neighbor(x, n, [&](int q) {
                    const Stone t = s.stones[q];
                    if (t == Stone::Black) {
                        touches_black = true;
                    } else if (t == Stone::White) {
                        touches_white = true;
                    } else if (!visited[q]) {
                        visited[q] = 1;
                        stack[top++] = static_cast<int16_t>(q);
                    }
                });
            }
            if (touches_black && !touches_white) {
                result.area_black += region;
            } else if (touches_white && !touches_black) {
                result.area_white += region;
            } else {
                result.neutral += region;
            }
        }
    }
    result.score = result.area_black - result.area_white - s.config.komi;
    return result;
}

double reward_from_score(double score) {
    if (score == 0.0) return 0.0;
    const double magnitude = 5.0 + 2.0 * std::log10(1.0 + std::fabs(score));
    return score > 0 ? magnitude : -magnitude;
}

double terminal_reward(const BoardConfig& config, double score) {
    if (config.shaped_reward) return reward_from_score(score);
    if (score == 0.0) return 0.0;
    return score > 0 ? 5.0 : -5.0;
}

Observation observe(const GameState& s) {
    const int n = s.config.size;
    Observation obs;
    obs.size = n;
    obs.data.assign(static_cast<size_t>(n) * n * Observation::kPlanes, 0.0f);
    std::vector<uint8_t> mask;
    if (!s.terminal) mask = legal_mask(s);
    const float turn = s.to_move == Stone::White ? 1.0f : 0.0f;
    const float passed = s.consecutive_passes > 0 ? 1.0f : 0.0f;
    const float over = s.terminal ? 1.0f : 0.0f;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const int p = r * n + c;
            obs.at(r, c, 0) = s.stones[p] == Stone::Black ? 1.0f : 0.0f;
            obs.at(r, c, 1) = s.stones[p] == Stone::White ? 1.0f : 0.0f;
            obs.at(r, c, 2) = turn;
            obs.at(r, c, 3) = (s.terminal || !mask[p]) ? 1.0f : 0.0f;
            obs.at(r, c, 4) = passed;
            obs.at(r, c, 5) = over;
        }
    }
    return obs;
}

FeaturePlanes features(const GameState& s) {
    const int n = s.config.size;
    const int points = n * n;
    FeaturePlanes f;
    f.size = n;
    f.data.assign(static_cast<size_t>(2 * points), 0.0f);
    for (int p = 0; p < points; ++p) {
        const Stone st = s.stones[p];
        f.data[p] = st == Stone::Black ? -1.0f : st == Stone::White ? 1.0f : 0.0f;
    }
    if (s.ko_point >= 0) f.data[s.ko_point] = 0.5f;
    const float turn = s.to_move == Stone::White ? 1.0f : 0.0f;
    std::fill(f.data.begin() + points, f.data.end(), turn);
    return f;
}

std::string dump(const GameState& s) {
    const int n = s.config.size;
    std::string out;
    out.reserve(static_cast<size_t>(n) * (n + 1));
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const Stone st = s.at(r, c);
            out.push_back(st == Stone::Black ? 'X' : st == Stone::White ? 'O' : '.');
        }
        out.push_back('\n');
    }
    return out;
}

}  // namespace qzero::go
