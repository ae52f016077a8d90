#include "core/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/error.hpp"
#include "core/soft_q.hpp"

namespace qzero::eval {

NetPlayer::NetPlayer(pipeline::ParamsPtr params, PlayMode mode, double alpha)
    : params_(std::move(params)), mode_(mode), alpha_(alpha) {
    if (!params_) fail(ErrorCode::InvalidArgument, "NetPlayer: null parameters");
}

std::vector<float> NetPlayer::q_values(const go::GameState& state) {
    if (state.config.size != params_->config.board_size) {
        fail(ErrorCode::Config, "board size " + std::to_string(state.config.size) + " does not match the network's " +
                                    std::to_string(params_->config.board_size));
    }
    nn::InputBatch in;
    in.board_size = state.config.size;
    in.push(go::features(state));
    ws_.forward(*params_, in, q_);
    return q_;
}

int NetPlayer::act(const go::GameState& state, Rng& rng) {
    q_values(state);
    const auto mask = go::legal_mask(state);
    if (mode_ == PlayMode::Argmax) return softq::masked_argmax<float>(q_, mask);
    return softq::sample_action(softq::policy_from_q<float>(q_, mask, alpha_), rng);
}

RandomPlayer::RandomPlayer(double pass_prob) : pass_prob_(pass_prob) {
    if (!(pass_prob >= 0.0 && pass_prob <= 1.0)) fail(ErrorCode::InvalidArgument, "pass probability must lie in [0, 1]");
}

std::vector<double> RandomPlayer::probabilities(std::span<const uint8_t> mask, double pass_prob) {
    const size_t pass = mask.size() - 1;
    std::vector<double> p(mask.size(), 0.0);
    size_t points = 0;
    for (size_t i = 0; i < pass; ++i) points += mask[i] ? 1 : 0;
    if (points == 0) {
        p[pass] = 1.0;
        return p;
    }
    const double pass_mass = mask[pass] ? pass_prob : 0.0;
    for (size_t i = 0; i < pass; ++i) {
        if (mask[i]) p[i] = (1.0 - pass_mass) / static_cast<double>(points);
    }
    p[pass] = pass_mass;
    return p;
}

int RandomPlayer::act(const go::GameState& state, Rng& rng) {
    const auto mask = go::legal_mask(state);
    const size_t pass = mask.size() - 1;
    std::vector<int> legal;
    for (size_t i = 0; i < pass; ++i) {
        if (mask[i]) legal.push_back(static_cast<int>(i));
    }
    if (legal.empty()) return static_cast<int>(pass);
    if (pass_prob_ > 0.0 && rng.uniform() < pass_prob_) return static_cast<int>(pass);
    return legal[rng.below(legal.size())];
}

GameOutcome play_game(Player& black, Player& white, const go::BoardConfig& config, Rng& rng) {
    GameOutcome out;
    out.record.config = config;
    go::GameState s = go::new_game(config);
    while (!s.terminal) {
        Player& p = s.to_move == go::Stone::Black ? black : white;
        const int a = p.act(s, rng);
        const auto err = go::play(s, a);
        if (err != go::MoveError::None) {
            fail(ErrorCode::IllegalMove, std::string("player chose an illegal move: ") + go::to_string(err));
        }
        out.record.moves.push_back(a);
    }
    out.score = go::score(s).score;
    out.move_count = s.move_count;
    out.winner = out.score > 0 ? go::Stone::Black : go::Stone::White;
    return out;
}

MatchResult play_match(Player& a, Player& b, const go::BoardConfig& config, bool a_black, Rng& rng) {
    GameOutcome g = a_black ? play_game(a, b, config, rng) : play_game(b, a, config, rng);
    MatchResult r;
    r.a_black = a_black;
    r.score = a_black ? g.score : -g.score;
    r.winner = (g.winner == go::Stone::Black) == a_black ? Side::A : Side::B;
    r.move_count = g.move_count;
    r.sgf = go::to_sgf(g.record);
    r.record = std::move(g.record);
    return r;
}

MatchResult play_match(const nn::Parameters& a, const nn::Parameters& b, const go::BoardConfig& config, PlayMode mode,
                       uint64_t seed, double alpha) {
    NetPlayer pa(std::make_shared<nn::Parameters>(a), mode, alpha);
    NetPlayer pb(std::make_shared<nn::Parameters>(b), mode, alpha);
    Rng rng(seed);
    return play_match(pa, pb, config, true, rng);
}

MatchSummary play_matches(Player& a, Player& b, const go::BoardConfig& config, int games, uint64_t seed) {
    MatchSummary s;
    Rng rng(seed);
    for (int i = 0; i < games; ++i) {
        const bool a_black = i % 2 == 0;
        MatchResult r = play_match(a, b, config, a_black, rng);
        ++s.games;
        s.a_black_games += a_black ? 1 : 0;
        (r.winner == Side::A ? s.a_wins : s.b_wins) += 1;
        s.results.push_back(std::move(r));
    }
    return s;
}

// --- pool --------------------------------------------------------------------

double HistoryPool::Entry::mean() const {
    if (outcomes.empty()) return 0.0;
    double sum = 0.0;
    for (uint8_t o : outcomes) sum += o;
    return sum / static_cast<double>(outcomes.size());
}

void HistoryPool::add(const pipeline::Snapshot& snapshot) {
    if (!snapshot.params) fail(ErrorCode::InvalidArgument, "history pool: snapshot without parameters");
    for (const auto& e : entries_) {
        if (e.version == snapshot.version) fail(ErrorCode::InvalidArgument, "history pool: version already present");
    }
    entries_.push_back(Entry{snapshot.version, snapshot.step, snapshot.params, {}});
}

const HistoryPool::Entry& HistoryPool::entry(uint64_t version) const {
    for (const auto& e : entries_) {
        if (e.version == version) return e;
    }
    fail(ErrorCode::NotFound, "history pool: no entry for version " + std::to_string(version));
}

void HistoryPool::update(uint64_t version, bool latest_won) {
    auto& e = const_cast<Entry&>(entry(version));
    e.outcomes.push_back(latest_won ? 1 : 0);
    while (e.outcomes.size() > kQueueLength) e.outcomes.pop_front();
}

double HistoryPool::hsg() const {
    double h = 0.0;
    for (const auto& e : entries_) h += e.mean();
    return h;
}

void HistoryPool::save(BinaryWriter& w) const {
    w.put<uint64_t>(entries_.size());
    for (const auto& e : entries_) {
        w.put<uint64_t>(e.version);
        w.put<int64_t>(e.step);
        w.put_string(nn::serialize(*e.params));
        const std::vector<uint8_t> q(e.outcomes.begin(), e.outcomes.end());
        w.put_array<uint8_t>(q);
    }
}

void HistoryPool::load(BinaryReader& r) {
    entries_.clear();
    const auto n = r.get<uint64_t>();
    for (uint64_t i = 0; i < n; ++i) {
        Entry e;
        e.version = r.get<uint64_t>();
        e.step = r.get<int64_t>();
        e.params = std::make_shared<nn::Parameters>(nn::deserialize<float>(r.get_string()));
        const auto q = r.get_array<uint8_t>();
        if (q.size() > kQueueLength) fail(ErrorCode::Corrupt, "history pool: outcome queue too long");
        e.outcomes.assign(q.begin(), q.end());
        entries_.push_back(std::move(e));
    }
}

// --- HSG log -----------------------------------------------------------------

std::string hsg_header() { return "step,hsg,pool_size"; }

std::string hsg_line(const HSGPoint& p) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%zu", static_cast<long long>(p.step), p.hsg, p.pool_size);
    return buf;
}

std::vector<HSGPoint> parse_hsg_log(const std::string& text) {
    std::vector<HSGPoint> out;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == hsg_header()) continue;
        HSGPoint p;
        long long step = 0;
        size_t pool = 0;
        if (std::sscanf(line.c_str(), "%lld,%lf,%zu", &step, &p.hsg, &pool) != 3) {
            fail(ErrorCode::Corrupt, "hsg log line " + std::to_string(line_no) + ": expected step,hsg,pool_size");
        }
        p.step = step;
        p.pool_size = pool;
        out.push_back(p);
    }
    return out;
}

// --- evaluator ---------------------------------------------------------------

MatchFn sampling_match(const go::BoardConfig& board, double alpha) {
    return [board, alpha](const pipeline::Snapshot& latest, const HistoryPool::Entry& opponent, bool latest_black, Rng& rng,
                          go::GameRecord* record) {
        NetPlayer a(latest.params, PlayMode::Sampling, alpha);
        NetPlayer b(opponent.params, PlayMode::Sampling, alpha);
        MatchResult r = play_match(a, b, board, latest_black, rng);
        if (record) *record = std::move(r.record);
        return r.winner == Side::A;
    };
}

Evaluator::Evaluator(EvaluatorConfig config, uint64_t seed, MatchFn match)
    : config_(std::move(config)), match_(std::move(match)), rng_(seed) {
    if (config_.pool_every_publications < 1) fail(ErrorCode::Config, "evaluator: pool cadence must be >= 1");
    if (config_.matches_per_publication < 0) fail(ErrorCode::Config, "evaluator: matches per publication must be >= 0");
    if (!match_) match_ = sampling_match(config_.board, config_.alpha);
}

std::vector<HSGPoint> Evaluator::on_publication(const pipeline::Snapshot& latest, std::vector<go::GameRecord>* games) {
    std::vector<HSGPoint> points;
    if (publications_ % config_.pool_every_publications == 0) pool_.add(latest);
    ++publications_;
    for (int m = 0; m < config_.matches_per_publication; ++m) {
        const auto& entries = pool_.entries();
        const auto& opponent = entries[rng_.below(entries.size())];
        const bool latest_black = games_ % 2 == 0;
        ++games_;
        go::GameRecord record;
        const bool won = match_(latest, opponent, latest_black, rng_, games ? &record : nullptr);
        pool_.update(opponent.version, won);
        if (games) games->push_back(std::move(record));
        const double h = pool_.hsg();
        cumulative_ += h;
        points.push_back(HSGPoint{latest.step, config_.cumulative ? cumulative_ : h, pool_.size()});
    }
    return points;
}

void Evaluator::save(BinaryWriter& w) const {
    w.put_string(rng_.save());
    w.put<int64_t>(publications_);
    w.put<int64_t>(games_);
    w.put<double>(cumulative_);
    pool_.save(w);
}

void Evaluator::load(BinaryReader& r) {
    rng_.load(r.get_string());
    publications_ = r.get<int64_t>();
    games_ = r.get<int64_t>();
    cumulative_ = r.get<double>();
    pool_.load(r);
}

// --- plot --------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_hsg_svg(const std::vector<HSGPoint>& points, const std::string& title) {
    const double w = 720, h = 440, left = 70, right = 20, top = 40, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    int64_t max_step = 1;
    double max_y = 1.0;
    for (const auto& p : points) {
        max_step = std::max(max_step, p.step);
        max_y = std::max({max_y, p.hsg, static_cast<double>(p.pool_size)});
    }
    auto x = [&](double step) { return left + pw * step / static_cast<double>(max_step); };
    auto y = [&](double v) { return top + ph * (1.0 - v / max_y); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
    os << "<g stroke=\"#888\" stroke-width=\"1\">\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
    os << "</g>\n";
    for (int i = 0; i <= 5; ++i) {
        const double vy = max_y * i / 5.0;
        const double vx = static_cast<double>(max_step) * i / 5.0;
        os << "<text x=\"" << left - 6 << "\" y=\"" << fmt(y(vy) + 4) << "\" text-anchor=\"end\">" << fmt(vy) << "</text>\n";
        os << "<text x=\"" << fmt(x(vx)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
           << static_cast<long long>(vx) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">training step</text>\n";
    auto polyline = [&](auto value, const char* colour, const char* dash) {
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"" << dash << " points=\"";
        for (const auto& p : points) os << fmt(x(static_cast<double>(p.step))) << ',' << fmt(y(value(p))) << ' ';
        os << "\"/>\n";
    };
    if (!points.empty()) {
        polyline([](const HSGPoint& p) { return static_cast<double>(p.pool_size); }, "#999", " stroke-dasharray=\"4 3\"");
        polyline([](const HSGPoint& p) { return p.hsg; }, "#1f5fbf", "");
    }
    os << "<g font-size=\"12\"><line x1=\"" << left + 12 << "\" y1=\"" << top + 12 << "\" x2=\"" << left + 36 << "\" y2=\""
       << top + 12 << "\" stroke=\"#1f5fbf\" stroke-width=\"2\"/><text x=\"" << left + 42 << "\" y=\"" << top + 16
       << "\">HSG</text>\n";
    os << "<line x1=\"" << left + 12 << "\" y1=\"" << top + 30 << "\" x2=\"" << left + 36 << "\" y2=\"" << top + 30
       << "\" stroke=\"#999\" stroke-dasharray=\"4 3\" stroke-width=\"2\"/><text x=\"" << left + 42 << "\" y=\"" << top + 34
       << "\">pool size</text></g>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace qzero::eval
