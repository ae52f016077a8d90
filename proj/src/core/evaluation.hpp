#pragma once

// Matches between agents, the uniform-random baseline, and the history pool
// behind the HSG curve.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/binio.hpp"
#include "core/go_engine.hpp"
#include "core/network.hpp"
#include "core/pipeline.hpp"
#include "core/rng.hpp"

namespace qzero::eval {

enum class PlayMode : uint8_t { Argmax, Sampling };

class Player {
public:
    virtual ~Player() = default;
    /// Chooses a legal action for the side to move.
    virtual int act(const go::GameState& state, Rng& rng) = 0;
};

/// Masked argmax over Q, or a softmax sample at temperature alpha.
class NetPlayer : public Player {
public:
    NetPlayer(pipeline::ParamsPtr params, PlayMode mode, double alpha);
    int act(const go::GameState& state, Rng& rng) override;
    std::vector<float> q_values(const go::GameState& state);

private:
    pipeline::ParamsPtr params_;
    PlayMode mode_;
    double alpha_;
    nn::Workspace<float> ws_;
    std::vector<float> q_;
};

/// Uniform over legal board points. Passes when nothing else is legal, or
/// with probability pass_prob otherwise.
class RandomPlayer : public Player {
public:
    explicit RandomPlayer(double pass_prob = 0.0);
    int act(const go::GameState& state, Rng& rng) override;
    static std::vector<double> probabilities(std::span<const uint8_t> mask, double pass_prob);

private:
    double pass_prob_;
};

struct GameOutcome {
    go::GameRecord record;
    double score = 0;  // Black's perspective
    int move_count = 0;
    go::Stone winner = go::Stone::Empty;
};

/// Plays one full game. Ties (integer komi) go to White.
GameOutcome play_game(Player& black, Player& white, const go::BoardConfig& config, Rng& rng);

enum class Side : uint8_t { A, B };

struct MatchResult {
    Side winner = Side::A;
    double score = 0;  // A's perspective
    int move_count = 0;
    bool a_black = true;
    go::GameRecord record;
    std::string sgf;
};

MatchResult play_match(Player& a, Player& b, const go::BoardConfig& config, bool a_black, Rng& rng);

/// Single game with A as Black; deterministic in seed.
MatchResult play_match(const nn::Parameters& a, const nn::Parameters& b, const go::BoardConfig& config, PlayMode mode,
                       uint64_t seed, double alpha);

struct MatchSummary {
    int games = 0;
    int a_wins = 0;
    int b_wins = 0;
    int a_black_games = 0;
    std::vector<MatchResult> results;
    double a_win_rate() const { return games ? static_cast<double>(a_wins) / games : 0.0; }
};

/// `games` matches alternating colours, A Black in even-indexed games.
MatchSummary play_matches(Player& a, Player& b, const go::BoardConfig& config, int games, uint64_t seed);

// --- HSG ---------------------------------------------------------------------

inline constexpr size_t kQueueLength = 10;

class HistoryPool {
public:
    struct Entry {
        uint64_t version = 0;
        int64_t step = 0;
        pipeline::ParamsPtr params;
        std::deque<uint8_t> outcomes;  // 1 when the latest network won
        double mean() const;
    };

    void add(const pipeline::Snapshot& snapshot);
    /// Throws Error(NotFound) for an unknown version.
    void update(uint64_t version, bool latest_won);

    double hsg() const;
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<Entry>& entries() const { return entries_; }
    const Entry& entry(uint64_t version) const;

    void save(BinaryWriter& w) const;
    void load(BinaryReader& r);

private:
    std::vector<Entry> entries_;
};

struct HSGPoint {
    int64_t step = 0;
    double hsg = 0;
    size_t pool_size = 0;
};

std::string hsg_header();
std::string hsg_line(const HSGPoint& p);
std::vector<HSGPoint> parse_hsg_log(const std::string& text);

struct EvaluatorConfig {
    go::BoardConfig board;
    double alpha = 0.081;
    int matches_per_publication = 2;
    int64_t pool_every_publications = 1;
    bool cumulative = false;
};

/// Decides one evaluation game; returns true when the latest network wins.
using MatchFn = std::function<bool(const pipeline::Snapshot& latest, const HistoryPool::Entry& opponent, bool latest_black,
                                   Rng& rng, go::GameRecord* record)>;

/// Sampling-mode match without exploration floor.
MatchFn sampling_match(const go::BoardConfig& board, double alpha);

class Evaluator {
public:
    Evaluator(EvaluatorConfig config, uint64_t seed, MatchFn match = nullptr);

    /// Handles one publication: maybe grows the pool, then plays the
    /// configured matches. Returns one point per match.
    std::vector<HSGPoint> on_publication(const pipeline::Snapshot& latest, std::vector<go::GameRecord>* games = nullptr);

    const HistoryPool& pool() const { return pool_; }
    int64_t publications_seen() const { return publications_; }

    void save(BinaryWriter& w) const;
    void load(BinaryReader& r);

private:
    EvaluatorConfig config_;
    MatchFn match_;
    Rng rng_;
    HistoryPool pool_;
    int64_t publications_ = 0;
    int64_t games_ = 0;
    double cumulative_ = 0;
};

/// HSG and pool size against step, as a standalone SVG document.
std::string render_hsg_svg(const std::vector<HSGPoint>& points, const std::string& title);

}  // namespace qzero::eval
