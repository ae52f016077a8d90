#include "core/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace qzero::oracle {

namespace {

double lse_value(const std::vector<double>& q, double alpha) {
    double m = -INFINITY;
    for (double v : q) m = std::max(m, v);
    double z = 0.0;
    for (double v : q) z += std::exp((v - m) / alpha);
    return m + alpha * std::log(z);
}

// Reverse topological order, or empty when the edge graph has a cycle.
std::vector<int> reverse_topological(const EnumerableGame& game) {
    const int n = static_cast<int>(game.size());
    std::vector<uint8_t> state(n, 0);  // 0 new, 1 open, 2 done
    std::vector<int> order;
    order.reserve(n);
    std::vector<std::pair<int, size_t>> stack;
    for (int start = 0; start < n; ++start) {
        if (state[start]) continue;
        stack.push_back({start, 0});
        state[start] = 1;
        while (!stack.empty()) {
            auto& [node, next_edge] = stack.back();
            const auto& edges = game.nodes[node].edges;
            if (next_edge < edges.size()) {
                const int child = edges[next_edge++].next;
                if (state[child] == 1) return {};
                if (state[child] == 0) {
                    state[child] = 1;
                    stack.push_back({child, 0});
                }
            } else {
                state[node] = 2;
                order.push_back(node);
                stack.pop_back();
            }
        }
    }
    return order;
}

SoftQTable empty_table(const EnumerableGame& game) {
    SoftQTable t;
    t.q.resize(game.size());
    for (size_t s = 0; s < game.size(); ++s) t.q[s].assign(game.nodes[s].edges.size(), 0.0);
    return t;
}

double backup(const EnumerableGame::Edge& e, const SoftQTable& table, double alpha, double gamma) {
    if (e.done) return e.reward;
    return e.reward - gamma * node_value(table, e.next, alpha);
}

std::string state_key(const go::GameState& s) {
    std::string k;
    const int points = s.config.points();
    k.reserve(points + 16 + 8 * s.position_history.size());
    for (int p = 0; p < points; ++p) k.push_back(static_cast<char>('0' + static_cast<int>(s.stones[p])));
    k.push_back(static_cast<char>(s.to_move));
    k.push_back(static_cast<char>(s.ko_point + 1));
    k.push_back(static_cast<char>(s.consecutive_passes));
    k.push_back(s.terminal ? 'T' : 'N');
    k.append(reinterpret_cast<const char*>(&s.move_count), sizeof(s.move_count));
    for (uint64_t h : s.position_history) k.append(reinterpret_cast<const char*>(&h), sizeof(h));
    return k;
}

}  // namespace

size_t EnumerableGame::pair_count() const {
    size_t n = 0;
    for (const auto& node : nodes) n += node.edges.size();
    return n;
}

void EnumerableGame::validate() const {
    if (nodes.empty() || root < 0 || root >= static_cast<int>(nodes.size())) fail(ErrorCode::InvalidArgument, name + ": bad root");
    for (const auto& node : nodes) {
        for (const auto& e : node.edges) {
            if (e.next < 0 || e.next >= static_cast<int>(nodes.size())) fail(ErrorCode::InvalidArgument, name + ": dangling edge");
            if (e.action < 0 || e.action >= action_space) fail(ErrorCode::InvalidArgument, name + ": action out of range");
            if (!e.done && nodes[e.next].terminal()) fail(ErrorCode::InvalidArgument, name + ": edge into terminal node without done");
        }
    }
}

double node_value(const SoftQTable& table, int node, double alpha) {
    const auto& q = table.q[node];
    if (q.empty()) return 0.0;
    return lse_value(q, alpha);
}

SoftQTable exact_soft_q(const EnumerableGame& game, double alpha, double gamma, double tol, int max_sweeps) {
    game.validate();
    if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "exact_soft_q: alpha must be positive");
    SoftQTable table = empty_table(game);
    if (gamma == 1.0) {
        const auto order = reverse_topological(game);
        if (order.empty()) fail(ErrorCode::InvalidArgument, "exact_soft_q: gamma = 1 needs an acyclic game");
        for (int s : order) {
            const auto& edges = game.nodes[s].edges;
            for (size_t i = 0; i < edges.size(); ++i) table.q[s][i] = backup(edges[i], table, alpha, gamma);
        }
        table.iterations = 1;
        return table;
    }
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        SoftQTable next = table;
        double change = 0.0;
        for (size_t s = 0; s < game.size(); ++s) {
            const auto& edges = game.nodes[s].edges;
            for (size_t i = 0; i < edges.size(); ++i) {
                next.q[s][i] = backup(edges[i], table, alpha, gamma);
                change = std::max(change, std::abs(next.q[s][i] - table.q[s][i]));
            }
        }
        next.residual_history = std::move(table.residual_history);
        next.residual_history.push_back(change);
        next.iterations = sweep + 1;
        table = std::move(next);
        if (change < tol) return table;
    }
    fail(ErrorCode::Internal, "exact_soft_q: no convergence within " + std::to_string(max_sweeps) + " sweeps");
}

double backup_residual(const EnumerableGame& game, const SoftQTable& table, double alpha, double gamma) {
    double worst = 0.0;
    for (size_t s = 0; s < game.size(); ++s) {
        const auto& edges = game.nodes[s].edges;
        for (size_t i = 0; i < edges.size(); ++i) worst = std::max(worst, std::abs(table.q[s][i] - backup(edges[i], table, alpha, gamma)));
    }
    return worst;
}

double sup_distance(const SoftQTable& a, const SoftQTable& b) {
    if (a.q.size() != b.q.size()) fail(ErrorCode::InvalidArgument, "sup_distance: tables differ in size");
    double worst = 0.0;
    for (size_t s = 0; s < a.q.size(); ++s) {
        if (a.q[s].size() != b.q[s].size()) fail(ErrorCode::InvalidArgument, "sup_distance: tables differ in shape");
        for (size_t i = 0; i < a.q[s].size(); ++i) worst = std::max(worst, std::abs(a.q[s][i] - b.q[s][i]));
    }
    return worst;
}

EnumerableGame depth_one_game() {
    EnumerableGame g;
    g.name = "depth-one";
    g.action_space = 2;
    g.nodes.resize(2);
    g.nodes[0].edges = {{0, 1, 5.0, true}, {1, 1, -5.0, true}};
    return g;
}

EnumerableGame depth_two_game(const std::array<std::array<double, 2>, 2>& replies) {
    EnumerableGame g;
    g.name = "depth-two";
    g.action_space = 2;
    g.nodes.resize(4);
    g.nodes[0].edges = {{0, 1, 0.0, false}, {1, 2, 0.0, false}};
    for (int a = 0; a < 2; ++a) g.nodes[1 + a].edges = {{0, 3, replies[a][0], true}, {1, 3, replies[a][1], true}};
    return g;
}

EnumerableGame entropy_tree(int first, int second) {
    if (first < 1 || second < 1) fail(ErrorCode::InvalidArgument, "entropy_tree: branching must be >= 1");
    EnumerableGame g;
    g.name = "entropy-tree";
    g.action_space = std::max(first, second);
    g.nodes.resize(first + 2);
    const int leaf = first + 1;
    for (int a = 0; a < first; ++a) {
        g.nodes[0].edges.push_back({a, 1 + a, 0.0, false});
        for (int b = 0; b < second; ++b) g.nodes[1 + a].edges.push_back({b, leaf, 0.0, true});
    }
    return g;
}

EnumerableGame tiny_go(int size, int move_cap, double komi, size_t max_states) {
    if (size < go::kTinySize || size > 3) fail(ErrorCode::InvalidArgument, "tiny_go: size must be 2 or 3");
    go::BoardConfig cfg;
    cfg.size = size;
    cfg.komi = komi;
    cfg.max_moves = move_cap;
    cfg.ko_rule = go::KoRule::PositionalSuperko;
    cfg.allow_tiny_board = true;
    cfg.allow_integer_komi = true;

    EnumerableGame g;
    g.name = "go" + std::to_string(size) + "x" + std::to_string(size) + "-cap" + std::to_string(move_cap);
    g.action_space = cfg.actions();
    std::unordered_map<std::string, int> index;
    auto intern = [&](const go::GameState& s) {
        auto [it, inserted] = index.emplace(state_key(s), static_cast<int>(g.states.size()));
        if (inserted) {
            if (g.states.size() >= max_states) {
                fail(ErrorCode::InvalidArgument, "tiny_go: more than " + std::to_string(max_states) + " states");
            }
            g.states.push_back(s);
            g.nodes.emplace_back();
        }
        return it->second;
    };
    g.root = intern(go::new_game(cfg));
    std::vector<uint8_t> mask(cfg.actions());
    for (size_t cursor = 0; cursor < g.states.size(); ++cursor) {
        if (g.states[cursor].terminal) continue;
        const go::GameState s = g.states[cursor];
        go::legal_mask_into(s, mask);
        std::vector<EnumerableGame::Edge> edges;
        for (int a = 0; a < cfg.actions(); ++a) {
            if (!mask[a]) continue;
            const auto r = go::step(s, a);
            edges.push_back({a, intern(r.state), r.reward, r.done != 0});
        }
        g.nodes[cursor].edges = std::move(edges);
    }
    return g;
}

go::ScoreResult brute_force_score(const go::GameState& state) {
    const int n = state.config.size;
    go::ScoreResult out;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const go::Stone here = state.at(r, c);
            if (here == go::Stone::Black) {
                out.area_black += 1;
                continue;
            }
            if (here == go::Stone::White) {
                out.area_white += 1;
                continue;
            }
            // Which colours can this empty point reach through empty points?
            std::vector<char> seen(n * n, 0);
            std::deque<std::pair<int, int>> frontier{{r, c}};
            seen[r * n + c] = 1;
            bool black = false, white = false;
            while (!frontier.empty()) {
                const auto [y, x] = frontier.front();
                frontier.pop_front();
                const std::pair<int, int> around[4] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
                for (const auto& [yy, xx] : around) {
                    if (yy < 0 || yy >= n || xx < 0 || xx >= n) continue;
                    const go::Stone st = state.at(yy, xx);
                    if (st == go::Stone::Black) {
                        black = true;
                    } else if (st == go::Stone::White) {
                        white = true;
                    } else if (!seen[yy * n + xx]) {
                        seen[yy * n + xx] = 1;
                        frontier.push_back({yy, xx});
                    }
                }
            }
            if (black && !white) {
                out.area_black += 1;
            } else if (white && !black) {
                out.area_white += 1;
            } else {
                ++out.neutral;
            }
        }
    }
    out.score = out.area_black - out.area_white - state.config.komi;
    return out;
}

SoftQTable tabular_qzero(const EnumerableGame& game, const softq::SoftQConfig& config, const TabularSchedule& schedule,
                         uint64_t seed) {
    game.validate();
    if (game.nodes[game.root].terminal()) fail(ErrorCode::InvalidArgument, "tabular_qzero: root is terminal");
    if (schedule.batch_size < 1 || schedule.env_steps_per_update < 1 || schedule.replay_capacity == 0) {
        fail(ErrorCode::Config, "tabular_qzero: invalid schedule");
    }
    struct Sample {
        int node;
        int edge;
        double outcome;  // +5 / -5 for the mover
    };

    SoftQTable online = empty_table(game);
    SoftQTable target = online;
    // Polyak averaging is applied lazily: between touches an online entry is
    // constant, so k averaging steps collapse to one geometric factor.
    std::vector<std::vector<int64_t>> synced(game.size());
    for (size_t s = 0; s < game.size(); ++s) synced[s].assign(online.q[s].size(), 0);
    int64_t polyak_steps = 0;
    auto sync = [&](int s, size_t i) {
        const int64_t k = polyak_steps - synced[s][i];
        if (k == 0) return;
        const double o = online.q[s][i];
        target.q[s][i] = o + (target.q[s][i] - o) * std::pow(schedule.rho, static_cast<double>(k));
        synced[s][i] = polyak_steps;
    };
    auto sync_node = [&](int s) {
        for (size_t i = 0; i < target.q[s].size(); ++i) sync(s, i);
    };
    Rng rng(derive_seed(seed, 0x7AB));
    std::vector<Sample> ring;
    ring.reserve(std::min<size_t>(schedule.replay_capacity, 1 << 20));
    size_t cursor = 0;
    std::vector<std::pair<int, int>> episode;
    int node = game.root;
    double episode_alpha = softq::actor_alpha(0, config, rng);

    auto act = [&](int64_t update) {
        const auto& edges = game.nodes[node].edges;
        std::vector<uint8_t> mask(edges.size(), 1);
        sync_node(node);
        auto policy = softq::policy_from_q<double>(target.q[node], mask, episode_alpha);
        if (config.min_action_prob > 0.0 && config.min_action_prob * static_cast<double>(edges.size()) < 1.0) {
            policy = softq::exploration_mix(policy, config.min_action_prob);
        }
        const int e = softq::sample_action(policy, rng);
        episode.push_back({node, e});
        const auto& edge = edges[e];
        if (!edge.done) {
            node = edge.next;
            return;
        }
        // The last mover's sign decides every earlier mover's outcome.
        const double last = edge.reward > 0 ? 5.0 : -5.0;
        const size_t len = episode.size();
        for (size_t t = 0; t < len; ++t) {
            const double outcome = (len - 1 - t) % 2 == 0 ? last : -last;
            const Sample s{episode[t].first, episode[t].second, outcome};
            if (ring.size() < schedule.replay_capacity) {
                ring.push_back(s);
            } else {
                ring[cursor] = s;
            }
            cursor = (cursor + 1) % schedule.replay_capacity;
        }
        episode.clear();
        node = game.root;
        episode_alpha = softq::actor_alpha(update, config, rng);
    };

    const size_t min_fill = std::max<size_t>(schedule.min_fill, 1);
    for (int64_t guard = 0; ring.size() < min_fill; ++guard) {
        if (guard > 100000000) fail(ErrorCode::Internal, "tabular_qzero: replay never filled");
        act(0);
    }

    std::vector<double> targets(schedule.batch_size);
    std::vector<const Sample*> batch(schedule.batch_size);
    for (int64_t u = 0; u < schedule.updates; ++u) {
        for (int k = 0; k < schedule.env_steps_per_update; ++k) act(u);
        const double alpha = softq::alpha_at(u, config);
        for (int b = 0; b < schedule.batch_size; ++b) {
            const Sample& s = ring[rng.below(ring.size())];
            batch[b] = &s;
            const auto& edge = game.nodes[s.node].edges[s.edge];
            if (u < schedule.ignition_updates) {
                targets[b] = softq::ignition_target(s.outcome);
            } else if (edge.done) {
                targets[b] = edge.reward;
            } else {
                sync_node(edge.next);
                const auto& next_q = target.q[edge.next];
                const std::vector<uint8_t> mask(next_q.size(), 1);
                const double v = config.entropy_cancellation ? softq::policy_weighted_value<double>(next_q, mask, alpha)
                                                             : node_value(target, edge.next, alpha);
                targets[b] = softq::q_target(edge.reward, 0, v, config.gamma);
            }
        }
        for (int b = 0; b < schedule.batch_size; ++b) {
            sync(batch[b]->node, batch[b]->edge);
            double& q = online.q[batch[b]->node][batch[b]->edge];
            q += schedule.lr * (targets[b] - q);
        }
        ++polyak_steps;
        online.iterations = static_cast<int>(u + 1);
    }
    return online;
}

}  // namespace qzero::oracle
