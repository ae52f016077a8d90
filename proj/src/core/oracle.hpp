#pragma once

// Ground truth for small games: explicit enumeration, exact soft Q by
// backward induction or value iteration, a tabular version of the learning
// loop, and an independent Tromp-Taylor scorer.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/go_engine.hpp"
#include "core/soft_q.hpp"

namespace qzero::oracle {

/// Finite alternating two-player game. Rewards are from the mover's perspective.
struct EnumerableGame {
    struct Edge {
        int action = 0;  // index into the full action vector
        int next = -1;
        double reward = 0.0;
        bool done = false;
    };
    struct Node {
        std::vector<Edge> edges;  // empty for terminal nodes
        bool terminal() const { return edges.empty(); }
    };

    std::string name;
    int action_space = 0;
    int root = 0;
    std::vector<Node> nodes;
    std::vector<go::GameState> states;  // populated for Go-derived games only

    size_t size() const { return nodes.size(); }
    size_t pair_count() const;

    /// Throws Error(InvalidArgument) when an edge leaves the node list or a
    /// non-terminal edge points at a terminal node without done.
    void validate() const;
};

/// Q-values per node over that node's edges, in edge order.
struct SoftQTable {
    std::vector<std::vector<double>> q;
    int iterations = 0;
    std::vector<double> residual_history;  // max change per sweep (value iteration only)
};

/// Soft state value of a node under a table (alpha * logsumexp(Q / alpha)).
double node_value(const SoftQTable& table, int node, double alpha);

/// Q(s, a) <- r - gamma (1 - d) y_v(s'). Acyclic games with gamma = 1 are
/// solved in one backward-induction pass; otherwise Jacobi sweeps run until the
/// largest change falls below tol. Throws Error(Internal) past max_sweeps.
SoftQTable exact_soft_q(const EnumerableGame& game, double alpha, double gamma, double tol = 1e-12, int max_sweeps = 100000);

/// Largest violation of the one-step backup over every state-action pair.
double backup_residual(const EnumerableGame& game, const SoftQTable& table, double alpha, double gamma);

double sup_distance(const SoftQTable& a, const SoftQTable& b);

// --- hand-built trees ---------------------------------------------------------

/// Root with two terminal actions worth +5 and -5.
EnumerableGame depth_one_game();

/// Two first-mover actions, each answered by two terminal replies with the given
/// second-mover rewards: replies[a] = {r_a0, r_a1}.
EnumerableGame depth_two_game(const std::array<std::array<double, 2>, 2>& replies);

/// Uniform tree without rewards: `first` root actions, each followed by `second`
/// replies that end the game with reward 0.
EnumerableGame entropy_tree(int first, int second);

// --- Go ----------------------------------------------------------------------

/// Exhaustive enumeration of size x size Go under positional superko and a move
/// cap. Throws Error(InvalidArgument) when more than max_states states appear.
EnumerableGame tiny_go(int size, int move_cap, double komi = 0.5, size_t max_states = 2000000);

/// Per-empty-point BFS scorer sharing no code with go::score.
go::ScoreResult brute_force_score(const go::GameState& state);

// --- tabular learning loop ---------------------------------------------------

struct TabularSchedule {
    int64_t updates = 100000;
    int batch_size = 32;
    int env_steps_per_update = 4;
    int64_t ignition_updates = 0;
    double lr = 0.5;    // Q <- Q + lr (y - Q)
    double rho = 0.5;   // target <- rho target + (1 - rho) online
    size_t replay_capacity = 20000;
    size_t min_fill = 64;
};

/// Self-play with the target table, uniform replay, ignition then bootstrap
/// targets, Polyak-averaged target table. Returns the online table.
SoftQTable tabular_qzero(const EnumerableGame& game, const softq::SoftQConfig& config, const TabularSchedule& schedule,
                         uint64_t seed);

}  // namespace qzero::oracle
