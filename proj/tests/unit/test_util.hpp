#pragma once

// Shared fixtures for the unit and acceptance suites. Everything here is
// written independently of the engine internals so it can serve as an oracle.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/go_engine.hpp"
#include "core/rng.hpp"

namespace qzero::testing {

/// Builds a position from rows of `.XO` characters.
inline go::GameState position(const std::vector<std::string>& rows, go::Stone to_move = go::Stone::Black,
                              go::BoardConfig config = {}) {
    config.size = static_cast<int>(rows.size());
    go::GameState s = go::new_game(config);
    for (int r = 0; r < config.size; ++r) {
        for (int c = 0; c < config.size; ++c) {
            const char ch = rows[r][c];
            const go::Stone st = ch == 'X' ? go::Stone::Black : ch == 'O' ? go::Stone::White : go::Stone::Empty;
            s.stones[r * config.size + c] = st;
            if (st != go::Stone::Empty) s.hash ^= go::zobrist_key(config.hash_seed, r * config.size + c, st);
        }
    }
    s.to_move = to_move;
    if (config.ko_rule == go::KoRule::PositionalSuperko) s.position_history = {s.hash};
    return s;
}

/// Liberty count of the group at `point` by explicit breadth-first search.
inline int oracle_liberties(const go::GameState& s, int point) {
    const int n = s.config.size;
    const go::Stone colour = s.stones[point];
    std::vector<uint8_t> seen(n * n, 0), lib(n * n, 0);
    std::vector<int> queue{point};
    seen[point] = 1;
    int liberties = 0;
    for (size_t i = 0; i < queue.size(); ++i) {
        const int p = queue[i];
        const int r = p / n, c = p % n;
        const int dr[4] = {-1, 1, 0, 0};
        const int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int rr = r + dr[k], cc = c + dc[k];
            if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
            const int q = rr * n + cc;
            if (s.stones[q] == go::Stone::Empty) {
                if (!lib[q]) {
                    lib[q] = 1;
                    ++liberties;
                }
            } else if (s.stones[q] == colour && !seen[q]) {
                seen[q] = 1;
                queue.push_back(q);
            }
        }
    }
    return liberties;
}

inline bool every_group_has_liberty(const go::GameState& s) {
    for (int p = 0; p < s.config.points(); ++p) {
        if (s.stones[p] != go::Stone::Empty && oracle_liberties(s, p) == 0) return false;
    }
    return true;
}

/// Uniformly random legal move; passes with probability `pass_prob` or when forced.
inline int random_legal_move(const go::GameState& s, Rng& rng, double pass_prob = 0.05) {
    const auto mask = go::legal_mask(s);
    std::vector<int> legal;
    for (int a = 0; a < s.config.points(); ++a) {
        if (mask[a]) legal.push_back(a);
    }
    if (legal.empty() || rng.uniform() < pass_prob) return s.config.pass();
    return legal[rng.below(legal.size())];
}

/// A random position reached by `moves` random legal moves (stops early at terminal).
inline go::GameState random_position(const go::BoardConfig& config, Rng& rng, int moves, double pass_prob = 0.05) {
    go::GameState s = go::new_game(config);
    for (int i = 0; i < moves && !s.terminal; ++i) go::play(s, random_legal_move(s, rng, pass_prob));
    return s;
}

}  // namespace qzero::testing
