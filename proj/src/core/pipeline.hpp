#pragma once

// Self-play training loop: actors, learner, parameter hub, checkpoints.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "core/binio.hpp"
#include "core/config.hpp"
#include "core/go_engine.hpp"
#include "core/network.hpp"
#include "core/replay.hpp"
#include "core/rng.hpp"

namespace qzero {

namespace eval {
class Evaluator;
}

namespace pipeline {

using ParamsPtr = std::shared_ptr<const nn::Parameters>;

struct Snapshot {
    ParamsPtr params;
    uint64_t version = 0;
    int64_t step = 0;  // learner updates completed when published
};

/// Single writer, many readers. Readers receive an immutable shared snapshot.
class ParameterHub {
public:
    /// Copies `params` and publishes it with the next version.
    Snapshot publish(const nn::Parameters& params, int64_t step);
    /// Restores a snapshot verbatim (resume only).
    void restore(Snapshot snapshot);

    Snapshot latest() const;
    uint64_t version() const;
    /// (version, step) of every publication, oldest first.
    std::vector<std::pair<uint64_t, int64_t>> history() const;

private:
    mutable std::mutex mutex_;
    Snapshot latest_;
    std::vector<std::pair<uint64_t, int64_t>> history_;
};

/// Ignition outcomes for one finished episode: outcome[i] is +5 or -5 for the
/// player who made move i. `final_reward` is the last mover's reward.
std::vector<float> episode_outcomes(size_t moves, double final_reward);

/// In-flight transitions of one game.
class EpisodeBuffer {
public:
    void add(TransitionRecord record) { records_.push_back(std::move(record)); }
    /// Stamps ignition outcomes from the terminal transition and returns the episode.
    std::vector<TransitionRecord> finish();
    size_t size() const { return records_.size(); }
    const std::vector<TransitionRecord>& records() const { return records_; }
    void clear() { records_.clear(); }

private:
    std::vector<TransitionRecord> records_;
};

/// One self-play worker. step() advances a single move.
class Actor {
public:
    Actor(const TrainConfig& config, uint64_t seed);

    void set_params(Snapshot snapshot) { params_ = std::move(snapshot); }
    const Snapshot& params() const { return params_; }

    /// Plays one move with the held snapshot. Returns the finished episode
    /// when the move ends the game, otherwise an empty vector.
    std::vector<TransitionRecord> step(int64_t learner_step);

    /// Plays until the current game ends and returns it.
    std::vector<TransitionRecord> play_episode(int64_t learner_step);

    int64_t episodes_completed() const { return episodes_; }
    const go::GameState& game() const { return game_; }

    void save(BinaryWriter& w) const;
    void load(BinaryReader& r);

private:
    void start_episode(int64_t learner_step);

    TrainConfig config_;
    Snapshot params_;
    Rng rng_;
    go::GameState game_;
    EpisodeBuffer episode_;
    double alpha_ = 0.0;
    bool in_episode_ = false;
    int64_t episodes_ = 0;
    nn::Workspace<float> ws_;
    std::vector<float> q_;
};

struct UpdateStats {
    int64_t step = 0;  // updates completed after this one
    double loss = 0;
    double mean_q = 0;
    double max_q = 0;
    double alpha = 0;
    double lr = 0;
    double rho = 0;
    size_t buffer_len = 0;
    int64_t episodes_completed = 0;
    bool ignition = false;
};

std::string log_header();
std::string log_line(const UpdateStats& s);

/// Owns the online and target parameters.
class Learner {
public:
    Learner(const TrainConfig& config, uint64_t seed);

    /// One gradient step. Throws Error(NotReady) when the buffer is not
    /// ready and Error(NonFinite) when the loss or parameters blow up.
    UpdateStats update(const ReplayBuffer& buffer);

    /// Regression targets for a batch at the current step (exposed for tests).
    std::vector<float> targets(const std::vector<TransitionRecord>& batch);

    int64_t step() const { return step_; }
    const nn::Parameters& online() const { return online_; }
    const nn::Parameters& target() const { return target_; }
    bool in_ignition() const { return step_ < config_.resolved_ignition_updates(); }

    void save(BinaryWriter& w) const;
    void load(BinaryReader& r, nn::Parameters online, nn::Parameters target);

private:
    TrainConfig config_;
    nn::Parameters online_;
    nn::Parameters target_;
    nn::SgdOptimizer<float> opt_;
    nn::Workspace<float> ws_;
    nn::Workspace<float> target_ws_;
    nn::Gradients grads_;
    Rng rng_;
    int64_t step_ = 0;
    std::vector<float> q_scratch_;
};

struct TrainOptions {
    std::string out_dir;
    std::string resume_from;  // checkpoint directory; empty starts fresh
    int64_t stop_after = -1;  // stop once this many updates are done (resume-split testing)
    std::atomic<bool>* stop = nullptr;
    std::function<void(const UpdateStats&)> on_update;
    bool write_eval_games = true;
};

struct TrainSummary {
    int64_t updates = 0;
    int64_t episodes = 0;
    uint64_t publications = 0;
    std::string final_checkpoint;
    std::string log_path;
    std::string hsg_path;
};

/// Runs to total_updates, writing `train_log.csv`, `hsg.csv` and
/// `ckpt_<step>/` directories under out_dir.
TrainSummary run_training(const TrainConfig& config, const TrainOptions& options);

std::string checkpoint_dir(const std::string& out_dir, int64_t step);

/// Reads the configuration stored in a checkpoint's state.bin.
TrainConfig checkpoint_config(const std::string& ckpt_dir);

void write_state(BinaryWriter& w, const go::GameState& s);
go::GameState read_state(BinaryReader& r);

}  // namespace pipeline
}  // namespace qzero
