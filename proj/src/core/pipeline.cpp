#include "core/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "core/error.hpp"
#include "core/evaluation.hpp"
#include "core/soft_q.hpp"
#include "core/symmetry.hpp"

namespace qzero::pipeline {

namespace fs = std::filesystem;

// --- hub ---------------------------------------------------------------------

Snapshot ParameterHub::publish(const nn::Parameters& params, int64_t step) {
    auto copy = std::make_shared<const nn::Parameters>(params);
    std::lock_guard lock(mutex_);
    latest_ = Snapshot{std::move(copy), latest_.version + 1, step};
    history_.emplace_back(latest_.version, step);
    return latest_;
}

void ParameterHub::restore(Snapshot snapshot) {
    std::lock_guard lock(mutex_);
    if (snapshot.version < latest_.version) fail(ErrorCode::InvalidArgument, "hub versions must not decrease");
    latest_ = std::move(snapshot);
    if (history_.empty() || history_.back().first != latest_.version) history_.emplace_back(latest_.version, latest_.step);
}

Snapshot ParameterHub::latest() const {
    std::lock_guard lock(mutex_);
    return latest_;
}

uint64_t ParameterHub::version() const {
    std::lock_guard lock(mutex_);
    return latest_.version;
}

std::vector<std::pair<uint64_t, int64_t>> ParameterHub::history() const {
    std::lock_guard lock(mutex_);
    return history_;
}

// --- episodes ----------------------------------------------------------------

std::vector<float> episode_outcomes(size_t moves, double final_reward) {
    std::vector<float> out(moves);
    if (moves == 0) return out;
    // Black makes the even-numbered moves. A drawn game counts as a White win.
    const bool last_black = (moves - 1) % 2 == 0;
    const double black_reward = last_black ? final_reward : -final_reward;
    const float black_outcome = black_reward > 0 ? 5.0f : -5.0f;
    for (size_t i = 0; i < moves; ++i) out[i] = i % 2 == 0 ? black_outcome : -black_outcome;
    return out;
}

std::vector<TransitionRecord> EpisodeBuffer::finish() {
    if (records_.empty()) fail(ErrorCode::InvalidArgument, "episode buffer: nothing to finish");
    if (!records_.back().done) fail(ErrorCode::InvalidArgument, "episode buffer: last transition is not terminal");
    const auto outcomes = episode_outcomes(records_.size(), records_.back().reward);
    for (size_t i = 0; i < records_.size(); ++i) records_[i].ignition_outcome = outcomes[i];
    std::vector<TransitionRecord> out;
    out.swap(records_);
    return out;
}

// --- state io ----------------------------------------------------------------

void write_state(BinaryWriter& w, const go::GameState& s) {
    const auto& c = s.config;
    w.put<int32_t>(c.size);
    w.put<double>(c.komi);
    w.put<int32_t>(c.max_moves);
    w.put<uint8_t>(c.suicide_allowed);
    w.put<uint8_t>(static_cast<uint8_t>(c.ko_rule));
    w.put<uint8_t>(c.shaped_reward);
    w.put<uint8_t>(c.allow_integer_komi);
    w.put<uint8_t>(c.allow_tiny_board);
    w.put<uint64_t>(c.hash_seed);
    std::vector<uint8_t> stones(c.points());
    for (int p = 0; p < c.points(); ++p) stones[p] = static_cast<uint8_t>(s.stones[p]);
    w.put_array<uint8_t>(stones);
    w.put<uint8_t>(static_cast<uint8_t>(s.to_move));
    w.put<int32_t>(s.ko_point);
    w.put<int32_t>(s.consecutive_passes);
    w.put<int32_t>(s.move_count);
    w.put<uint8_t>(s.terminal);
    w.put<uint64_t>(s.hash);
    w.put_array<uint64_t>(s.position_history);
}

go::GameState read_state(BinaryReader& r) {
    go::BoardConfig c;
    c.size = r.get<int32_t>();
    c.komi = r.get<double>();
    c.max_moves = r.get<int32_t>();
    c.suicide_allowed = r.get<uint8_t>() != 0;
    const auto ko = r.get<uint8_t>();
    if (ko > 1) fail(ErrorCode::Corrupt, "game state: bad ko rule");
    c.ko_rule = static_cast<go::KoRule>(ko);
    c.shaped_reward = r.get<uint8_t>() != 0;
    c.allow_integer_komi = r.get<uint8_t>() != 0;
    c.allow_tiny_board = r.get<uint8_t>() != 0;
    c.hash_seed = r.get<uint64_t>();
    try {
        c.validate();
    } catch (const Error& e) {
        fail(ErrorCode::Corrupt, std::string("game state: ") + e.what());
    }
    go::GameState s = go::new_game(c);
    const auto stones = r.get_array<uint8_t>();
    if (stones.size() != static_cast<size_t>(c.points())) fail(ErrorCode::Corrupt, "game state: wrong point count");
    for (int p = 0; p < c.points(); ++p) {
        if (stones[p] > 2) fail(ErrorCode::Corrupt, "game state: bad stone value");
        s.stones[p] = static_cast<go::Stone>(stones[p]);
    }
    const auto turn = r.get<uint8_t>();
    if (turn != 1 && turn != 2) fail(ErrorCode::Corrupt, "game state: bad side to move");
    s.to_move = static_cast<go::Stone>(turn);
    s.ko_point = r.get<int32_t>();
    s.consecutive_passes = r.get<int32_t>();
    s.move_count = r.get<int32_t>();
    s.terminal = r.get<uint8_t>() != 0;
    s.hash = r.get<uint64_t>();
    s.position_history = r.get_array<uint64_t>();
    return s;
}

namespace {

void write_snapshot(BinaryWriter& w, const Snapshot& s) {
    w.put<uint64_t>(s.version);
    w.put<int64_t>(s.step);
    w.put<uint8_t>(s.params ? 1 : 0);
    if (s.params) w.put_string(nn::serialize(*s.params));
}

Snapshot read_snapshot(BinaryReader& r) {
    Snapshot s;
    s.version = r.get<uint64_t>();
    s.step = r.get<int64_t>();
    if (r.get<uint8_t>()) s.params = std::make_shared<const nn::Parameters>(nn::deserialize<float>(r.get_string()));
    return s;
}

nn::NetConfig net_config(const TrainConfig& c) {
    nn::NetConfig n = c.net;
    n.board_size = c.board.size;
    n.precision = nn::Precision::Single;
    return n;
}

}  // namespace

// --- actor -------------------------------------------------------------------

Actor::Actor(const TrainConfig& config, uint64_t seed) : config_(config), rng_(seed), game_(go::new_game(config.board)) {}

void Actor::start_episode(int64_t learner_step) {
    game_ = go::new_game(config_.board);
    alpha_ = softq::actor_alpha(learner_step, config_.softq, rng_);
    episode_.clear();
    in_episode_ = true;
}

std::vector<TransitionRecord> Actor::step(int64_t learner_step) {
    if (!params_.params) fail(ErrorCode::NotReady, "actor has no parameters");
    if (!in_episode_) start_episode(learner_step);

    const auto feats = go::features(game_);
    nn::InputBatch in;
    in.board_size = config_.board.size;
    in.push(feats);
    ws_.forward(*params_.params, in, q_);

    TransitionRecord rec;
    rec.legal_mask = go::legal_mask(game_);
    auto policy = softq::policy_from_q<float>(q_, rec.legal_mask, alpha_);
    policy = softq::exploration_mix(policy, config_.softq.min_action_prob);
    rec.action = softq::sample_action(policy, rng_);
    rec.state = PackedPlanes::pack(feats);

    double reward = 0.0;
    int done = 0;
    const auto err = go::play(game_, rec.action, &reward, &done);
    if (err != go::MoveError::None) fail(ErrorCode::Internal, std::string("actor sampled an illegal move: ") + go::to_string(err));
    rec.reward = static_cast<float>(reward);
    rec.done = static_cast<uint8_t>(done);
    rec.next_state = PackedPlanes::pack(go::features(game_));
    rec.next_legal_mask = done ? std::vector<uint8_t>(rec.legal_mask.size(), 0) : go::legal_mask(game_);
    episode_.add(std::move(rec));

    if (!done) return {};
    in_episode_ = false;
    ++episodes_;
    return episode_.finish();
}

std::vector<TransitionRecord> Actor::play_episode(int64_t learner_step) {
    for (;;) {
        auto ep = step(learner_step);
        if (!ep.empty()) return ep;
    }
}

void Actor::save(BinaryWriter& w) const {
    w.put_string(rng_.save());
    write_state(w, game_);
    w.put<double>(alpha_);
    w.put<uint8_t>(in_episode_);
    w.put<int64_t>(episodes_);
    w.put<uint64_t>(episode_.size());
    for (const auto& r : episode_.records()) write_record(w, r);
    write_snapshot(w, params_);
}

void Actor::load(BinaryReader& r) {
    rng_.load(r.get_string());
    game_ = read_state(r);
    alpha_ = r.get<double>();
    in_episode_ = r.get<uint8_t>() != 0;
    episodes_ = r.get<int64_t>();
    episode_.clear();
    const auto n = r.get<uint64_t>();
    for (uint64_t i = 0; i < n; ++i) episode_.add(read_record(r));
    params_ = read_snapshot(r);
}

// --- learner -----------------------------------------------------------------

std::string log_header() { return "step,loss,mean_q,max_q,alpha,lr,rho,buffer_len,episodes_completed"; }

std::string log_line(const UpdateStats& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%zu,%lld", static_cast<long long>(s.step), s.loss, s.mean_q,
                  s.max_q, s.alpha, s.lr, s.rho, s.buffer_len, static_cast<long long>(s.episodes_completed));
    return buf;
}

Learner::Learner(const TrainConfig& config, uint64_t seed) : config_(config), rng_(derive_seed(seed, 1)) {
    online_ = nn::init<float>(net_config(config), derive_seed(seed, 0));
    target_ = online_;
}

std::vector<float> Learner::targets(const std::vector<TransitionRecord>& batch) {
    std::vector<float> y(batch.size());
    if (in_ignition()) {
        for (size_t i = 0; i < batch.size(); ++i) y[i] = static_cast<float>(softq::ignition_target(batch[i].ignition_outcome));
        return y;
    }
    const double alpha = softq::alpha_at(step_, config_.softq);
    nn::InputBatch next;
    next.board_size = config_.board.size;
    std::vector<size_t> rows;
    for (size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].done) continue;
        next.push(batch[i].next_state_features());
        rows.push_back(i);
    }
    std::vector<double> next_value(batch.size(), 0.0);
    if (!rows.empty()) {
        target_ws_.forward(target_, next, q_scratch_);
        const size_t actions = static_cast<size_t>(config_.board.actions());
        for (size_t k = 0; k < rows.size(); ++k) {
            const std::span<const float> q(q_scratch_.data() + k * actions, actions);
            const auto& mask = batch[rows[k]].next_legal_mask;
            next_value[rows[k]] = config_.softq.entropy_cancellation ? softq::policy_weighted_value<float>(q, mask, alpha)
                                                                     : softq::soft_state_value<float>(q, mask, alpha);
        }
    }
    for (size_t i = 0; i < batch.size(); ++i) {
        y[i] = static_cast<float>(softq::q_target(batch[i].reward, batch[i].done, next_value[i], config_.softq.gamma));
    }
    return y;
}

namespace {

std::string nonfinite_report(const nn::Parameters& p, int64_t step, double loss, double lr, double rho) {
    std::ostringstream os;
    os << "non-finite training state at update " << step << ": loss=" << loss << " lr=" << lr << " rho=" << rho;
    for (const auto& spec : p.specs) {
        size_t bad = 0;
        double worst = 0.0;
        for (size_t i = 0; i < spec.count; ++i) {
            const double v = p.values[spec.offset + i];
            if (!std::isfinite(v)) {
                ++bad;
            } else {
                worst = std::max(worst, std::abs(v));
            }
        }
        os << "\n  " << spec.name << ": non-finite=" << bad << " max|w|=" << worst;
    }
    return os.str();
}

bool all_finite(std::span<const float> v) {
    for (float x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

UpdateStats Learner::update(const ReplayBuffer& buffer) {
    auto batch = buffer.sample(static_cast<size_t>(config_.batch_size), rng_, config_.resolved_min_fill());
    if (config_.augment) {
        for (auto& rec : batch) rec = augment(rec, d4::sample(rng_));
    }

    UpdateStats s;
    s.ignition = in_ignition();
    s.alpha = softq::alpha_at(step_, config_.softq);
    s.lr = config_.lr.at(step_);
    s.rho = config_.rho.at(step_);

    const auto y = targets(batch);
    nn::InputBatch in;
    in.board_size = config_.board.size;
    std::vector<int> actions;
    actions.reserve(batch.size());
    for (const auto& rec : batch) {
        in.push(rec.state_features());
        actions.push_back(rec.action);
    }
    bool finite_targets = true;
    for (float v : y) finite_targets = finite_targets && std::isfinite(v);
    if (!finite_targets) fail(ErrorCode::NonFinite, "non-finite target; " + nonfinite_report(target_, step_, NAN, s.lr, s.rho));
    const auto res = ws_.loss_and_grad(online_, in, actions, std::span<const float>(y), config_.l2_c, grads_);
    if (!std::isfinite(res.loss)) fail(ErrorCode::NonFinite, nonfinite_report(online_, step_, res.loss, s.lr, s.rho));

    opt_.step(online_, grads_, s.lr, config_.momentum);
    nn::polyak(target_, online_, s.rho);
    if (!all_finite(online_.values) || !all_finite(target_.values)) {
        fail(ErrorCode::NonFinite, nonfinite_report(online_, step_, res.loss, s.lr, s.rho));
    }
    ++step_;

    s.step = step_;
    s.loss = res.loss;
    double sum = 0.0, mx = -INFINITY;
    for (float q : res.q_taken) {
        sum += q;
        mx = std::max(mx, static_cast<double>(q));
    }
    s.mean_q = res.q_taken.empty() ? 0.0 : sum / static_cast<double>(res.q_taken.size());
    s.max_q = res.q_taken.empty() ? 0.0 : mx;
    s.buffer_len = buffer.size();
    return s;
}

void Learner::save(BinaryWriter& w) const {
    w.put<int64_t>(step_);
    w.put_string(rng_.save());
    w.put_array<float>(opt_.velocity());
}

void Learner::load(BinaryReader& r, nn::Parameters online, nn::Parameters target) {
    const auto expect = net_config(config_);
    if (!(online.config == expect) || !(target.config == expect)) {
        fail(ErrorCode::Config, "checkpoint network does not match the configured board/net");
    }
    step_ = r.get<int64_t>();
    rng_.load(r.get_string());
    auto v = r.get_array<float>();
    if (!v.empty() && v.size() != online.size()) fail(ErrorCode::Corrupt, "optimizer state size mismatch");
    opt_.set_velocity(std::move(v));
    online_ = std::move(online);
    target_ = std::move(target);
}

// --- training ----------------------------------------------------------------

std::string checkpoint_dir(const std::string& out_dir, int64_t step) {
    return (fs::path(out_dir) / ("ckpt_" + std::to_string(step))).string();
}

namespace {

constexpr char kStateMagic[4] = {'Q', 'Z', 'S', 'T'};
constexpr uint32_t kStateFormat = 1;

struct StateHeader {
    std::string config_text;
    int64_t episodes = 0;
};

BinaryReader open_state(const std::string& bytes, StateHeader& header) {
    if (bytes.size() < 16 || bytes.compare(0, 4, std::string_view(kStateMagic, 4)) != 0) {
        fail(ErrorCode::Corrupt, "state.bin: bad magic");
    }
    const std::string_view body(bytes.data(), bytes.size() - 8);
    uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (stored != fnv1a(body)) fail(ErrorCode::Corrupt, "state.bin: checksum mismatch");
    BinaryReader r(body);
    r.get_raw(4);
    if (r.get<uint32_t>() != kStateFormat) fail(ErrorCode::Corrupt, "state.bin: unsupported format");
    header.config_text = r.get_string();
    header.episodes = r.get<int64_t>();
    return r;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

// Keeps the header and every line whose leading step is <= step.
void truncate_log(const std::string& path, const std::string& header, int64_t step) {
    std::string kept = header + "\n";
    if (fs::exists(path)) {
        for (const auto& line : read_lines(path)) {
            if (line.empty() || line == header) continue;
            if (std::stoll(line.substr(0, line.find(','))) <= step) kept += line + "\n";
        }
    }
    write_file(path, kept);
}

class LogFile {
public:
    explicit LogFile(const std::string& path) : f_(std::fopen(path.c_str(), "ab")) {
        if (!f_) fail(ErrorCode::Io, "cannot open " + path);
    }
    ~LogFile() { std::fclose(f_); }
    LogFile(const LogFile&) = delete;
    LogFile& operator=(const LogFile&) = delete;
    void line(const std::string& s) {
        std::fputs(s.c_str(), f_);
        std::fputc('\n', f_);
        std::fflush(f_);
    }

private:
    std::FILE* f_;
};

struct Run {
    TrainConfig config;
    TrainOptions options;
    ReplayBuffer buffer;
    Learner learner;
    ParameterHub hub;
    std::vector<std::unique_ptr<Actor>> actors;
    std::unique_ptr<eval::Evaluator> evaluator;
    std::mutex eval_mutex;
    std::atomic<int64_t> episodes{0};
    std::atomic<int64_t> learner_step{0};
    std::unique_ptr<LogFile> log;
    std::unique_ptr<LogFile> hsg;
    std::unique_ptr<LogFile> games;

    Run(const TrainConfig& c, const TrainOptions& o)
        : config(c), options(o), buffer(c.replay_capacity), learner(c, derive_seed(c.seed, 1)) {
        for (int i = 0; i < c.actor_count; ++i) actors.push_back(std::make_unique<Actor>(c, derive_seed(c.seed, 100 + i)));
        if (c.eval_enabled) {
            eval::EvaluatorConfig ec;
            ec.board = c.board;
            ec.alpha = c.softq.alpha;
            ec.matches_per_publication = c.eval_matches_per_publication;
            ec.pool_every_publications = c.eval_pool_every_publications;
            ec.cumulative = c.hsg_cumulative;
            evaluator = std::make_unique<eval::Evaluator>(ec, derive_seed(c.seed, 2));
        }
    }

    void evaluate(const Snapshot& snap) {
        if (!evaluator) return;
        std::lock_guard lock(eval_mutex);
        std::vector<go::GameRecord> records;
        const auto points = evaluator->on_publication(snap, options.write_eval_games ? &records : nullptr);
        for (const auto& p : points) hsg->line(eval::hsg_line(p));
        if (games) {
            for (const auto& rec : records) games->line(go::to_sgf(rec));
        }
    }

    void publish(int64_t step, bool inline_eval) {
        const Snapshot snap = hub.publish(learner.target(), step);
        if (inline_eval) evaluate(snap);
    }

    std::string save_checkpoint() {
        const std::string dir = checkpoint_dir(options.out_dir, learner.step());
        fs::create_directories(dir);
        nn::save(learner.online(), (fs::path(dir) / "params.bin").string());
        nn::save(learner.target(), (fs::path(dir) / "target.bin").string());

        BinaryWriter w;
        w.put_raw(std::string_view(kStateMagic, 4));
        w.put<uint32_t>(kStateFormat);
        w.put_string(config.to_text());
        w.put<int64_t>(episodes.load());
        learner.save(w);
        buffer.save(w);
        write_snapshot(w, hub.latest());
        const auto hist = hub.history();
        w.put<uint64_t>(hist.size());
        for (const auto& [v, s] : hist) {
            w.put<uint64_t>(v);
            w.put<int64_t>(s);
        }
        // Asynchronous actors are mid-game on other threads; only synchronous runs keep their state.
        const bool keep_actors = config.mode == TrainMode::Sync;
        w.put<uint64_t>(keep_actors ? actors.size() : 0);
        if (keep_actors) {
            for (const auto& a : actors) a->save(w);
        }
        w.put<uint8_t>(evaluator ? 1 : 0);
        if (evaluator) {
            std::lock_guard lock(eval_mutex);
            evaluator->save(w);
        }
        std::string bytes = w.take();
        const uint64_t sum = fnv1a(bytes);
        bytes.append(reinterpret_cast<const char*>(&sum), 8);
        const auto path = fs::path(dir) / "state.bin";
        write_file((path.string() + ".tmp"), bytes);
        fs::rename(path.string() + ".tmp", path);
        return dir;
    }

    void load_checkpoint(const std::string& dir) {
        StateHeader header;
        const std::string bytes = read_file((fs::path(dir) / "state.bin").string());
        BinaryReader r = open_state(bytes, header);
        const TrainConfig saved = TrainConfig::parse(header.config_text);
        if (!(saved.board == config.board) || saved.net.blocks != config.net.blocks || saved.net.filters != config.net.filters) {
            fail(ErrorCode::Config, "checkpoint " + dir + " was written for a different board or network");
        }
        episodes = header.episodes;
        learner.load(r, nn::load((fs::path(dir) / "params.bin").string()), nn::load((fs::path(dir) / "target.bin").string()));
        learner_step = learner.step();
        buffer.load(r);
        hub.restore(read_snapshot(r));
        const auto hist_n = r.get<uint64_t>();
        for (uint64_t i = 0; i < hist_n; ++i) {
            r.get<uint64_t>();
            r.get<int64_t>();
        }
        const auto n_actors = r.get<uint64_t>();
        if (n_actors != 0 && n_actors != actors.size()) fail(ErrorCode::Config, "checkpoint actor count differs from config");
        for (uint64_t i = 0; i < n_actors; ++i) actors[i]->load(r);
        if (n_actors == 0) {
            for (auto& a : actors) a->set_params(hub.latest());
        }
        const bool had_eval = r.get<uint8_t>() != 0;
        if (had_eval && evaluator) {
            evaluator->load(r);
        } else if (had_eval != static_cast<bool>(evaluator)) {
            fail(ErrorCode::Config, "checkpoint evaluator state does not match eval.enabled");
        }
    }

    bool should_stop() const {
        const int64_t s = learner.step();
        if (s >= config.total_updates) return true;
        if (options.stop_after >= 0 && s >= options.stop_after) return true;
        return options.stop && options.stop->load();
    }

    bool warm() const {
        return buffer.is_ready(config.resolved_min_fill()) && episodes.load() >= config.ignition_min_episodes;
    }

    void after_update(const UpdateStats& stats, bool inline_eval, std::string& last_ckpt) {
        log->line(log_line(stats));
        if (options.on_update) options.on_update(stats);
        const int64_t s = stats.step;
        learner_step = s;
        if (s % config.publish_every_updates == 0) publish(s, inline_eval);
        if (config.mode == TrainMode::Sync && s % config.actor_refresh_every_updates == 0) actors[0]->set_params(hub.latest());
        if (s % config.checkpoint_every == 0 || s == config.total_updates) last_ckpt = save_checkpoint();
    }

    void sync_loop(std::string& last_ckpt) {
        Actor& actor = *actors[0];
        auto env_step = [&] {
            auto ep = actor.step(learner.step());
            if (!ep.empty()) {
                buffer.push_episode(std::move(ep));
                ++episodes;
            }
        };
        while (!should_stop()) {
            for (int k = 0; k < config.sync_env_steps_per_update; ++k) env_step();
            while (!warm()) env_step();
            UpdateStats stats = learner.update(buffer);
            stats.episodes_completed = episodes.load();
            after_update(stats, true, last_ckpt);
        }
    }

    void async_loop(std::string& last_ckpt) {
        std::atomic<bool> quit{false};
        std::vector<std::thread> threads;
        for (auto& a : actors) {
            threads.emplace_back([&, actor = a.get()] {
                int64_t refreshed_at = learner_step.load();
                while (!quit.load()) {
                    auto ep = actor->play_episode(learner_step.load());
                    buffer.push_episode(std::move(ep));
                    ++episodes;
                    const int64_t now = learner_step.load();
                    if (now - refreshed_at >= config.actor_refresh_every_updates) {
                        actor->set_params(hub.latest());
                        refreshed_at = now;
                    }
                }
            });
        }
        std::thread eval_thread;
        if (evaluator) {
            eval_thread = std::thread([&] {
                uint64_t seen = hub.version();
                while (!quit.load()) {
                    const Snapshot snap = hub.latest();
                    if (snap.version != seen) {
                        seen = snap.version;
                        evaluate(snap);
                    } else {
                        std::this_thread::sleep_for(std::chrono::milliseconds(5));
                    }
                }
            });
        }
        auto stop_all = [&] {
            quit = true;
            for (auto& t : threads) t.join();
            if (eval_thread.joinable()) eval_thread.join();
        };
        try {
            while (!should_stop()) {
                if (!warm()) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(1));
                    continue;
                }
                UpdateStats stats = learner.update(buffer);
                stats.episodes_completed = episodes.load();
                after_update(stats, false, last_ckpt);
            }
        } catch (...) {
            stop_all();
            throw;
        }
        stop_all();
    }
};

}  // namespace

TrainConfig checkpoint_config(const std::string& ckpt_dir) {
    StateHeader header;
    const std::string bytes = read_file((fs::path(ckpt_dir) / "state.bin").string());
    open_state(bytes, header);
    return TrainConfig::parse(header.config_text);
}

TrainSummary run_training(const TrainConfig& config_in, const TrainOptions& options) {
    TrainConfig config = config_in;
    config.net.board_size = config.board.size;
    config.validate();
    if (options.out_dir.empty()) fail(ErrorCode::InvalidArgument, "training needs an output directory");
    fs::create_directories(options.out_dir);

    auto run = std::make_unique<Run>(config, options);
    TrainSummary summary;
    summary.log_path = (fs::path(options.out_dir) / "train_log.csv").string();
    summary.hsg_path = (fs::path(options.out_dir) / "hsg.csv").string();
    const std::string games_path = (fs::path(options.out_dir) / "eval_games.sgf").string();
    write_file((fs::path(options.out_dir) / "config.txt").string(), config.to_text());

    std::string last_ckpt;
    if (!options.resume_from.empty()) {
        run->load_checkpoint(options.resume_from);
        truncate_log(summary.log_path, log_header(), run->learner.step());
        truncate_log(summary.hsg_path, eval::hsg_header(), run->learner.step());
        last_ckpt = options.resume_from;
    } else {
        write_file(summary.log_path, log_header() + "\n");
        write_file(summary.hsg_path, eval::hsg_header() + "\n");
        if (options.write_eval_games) write_file(games_path, "");
    }
    run->log = std::make_unique<LogFile>(summary.log_path);
    run->hsg = std::make_unique<LogFile>(summary.hsg_path);
    if (options.write_eval_games && config.eval_enabled) run->games = std::make_unique<LogFile>(games_path);

    if (options.resume_from.empty()) {
        run->publish(0, true);
        for (auto& a : run->actors) a->set_params(run->hub.latest());
        last_ckpt = run->save_checkpoint();
    }

    try {
        if (config.mode == TrainMode::Sync) {
            run->sync_loop(last_ckpt);
        } else {
            run->async_loop(last_ckpt);
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFinite) write_file((fs::path(options.out_dir) / "nonfinite.txt").string(), e.what());
        throw;
    }

    if (last_ckpt != checkpoint_dir(options.out_dir, run->learner.step()) && run->learner.step() > 0) {
        last_ckpt = run->save_checkpoint();
    }
    summary.updates = run->learner.step();
    summary.episodes = run->episodes.load();
    summary.publications = run->hub.version();
    summary.final_checkpoint = last_ckpt;
    return summary;
}

}  // namespace qzero::pipeline
