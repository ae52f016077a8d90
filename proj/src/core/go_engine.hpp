#pragma once

// N x N Go environment: rules, Tromp-Taylor scoring, observations and the
// network feature encoding.
//
// Action indices are row-major board points 0..N*N-1 followed by PASS = N*N.
// Scores are always from Black's perspective; rewards returned by step() are
// from the perspective of the player who made the move.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qzero::go {

inline constexpr int kMinSize = 3;
inline constexpr int kTinySize = 2;  // exhaustive-enumeration boards only
inline constexpr int kMaxSize = 19;
inline constexpr int kMaxPoints = kMaxSize * kMaxSize;

enum class Stone : uint8_t { Empty = 0, Black = 1, White = 2 };

constexpr Stone opponent(Stone c) { return c == Stone::Black ? Stone::White : Stone::Black; }

enum class KoRule : uint8_t { Simple, PositionalSuperko };

struct BoardConfig {
    int size = 9;
    double komi = 7.5;
    int max_moves = 0;  // 0 selects 2 * size * size
    bool suicide_allowed = false;
    KoRule ko_rule = KoRule::Simple;
    bool shaped_reward = true;
    bool allow_integer_komi = false;
    bool allow_tiny_board = false;
    uint64_t hash_seed = 0x51A7E0C0FFEEULL;

    int points() const { return size * size; }
    int actions() const { return size * size + 1; }
    int pass() const { return size * size; }
    int move_cap() const { return max_moves > 0 ? max_moves : 2 * size * size; }

    /// Throws Error(Config) when out of range.
    void validate() const;
    bool operator==(const BoardConfig&) const = default;
};

struct GameState {
    BoardConfig config;
    std::array<Stone, kMaxPoints> stones{};
    Stone to_move = Stone::Black;
    int ko_point = -1;
    int consecutive_passes = 0;
    int move_count = 0;
    bool terminal = false;
    uint64_t hash = 0;
    // Sorted hashes of every position seen so far; only maintained under positional superko.
    std::vector<uint64_t> position_history;

    int size() const { return config.size; }
    Stone at(int point) const { return stones[point]; }
    Stone at(int row, int col) const { return stones[row * config.size + col]; }

    bool operator==(const GameState&) const = default;
};

enum class MoveError : uint8_t { None, Occupied, Ko, Suicide, Superko, Terminal, OutOfRange };

const char* to_string(MoveError e);

struct StepResult {
    GameState state;
    double reward = 0.0;  // mover's perspective
    int done = 0;
};

struct ScoreResult {
    double area_black = 0;
    double area_white = 0;
    double score = 0;  // area_black - area_white - komi
    int neutral = 0;
};

/// Observation planes, shape (N, N, 6), stored row-major with the plane index fastest.
struct Observation {
    static constexpr int kPlanes = 6;
    int size = 0;
    std::vector<float> data;

    float at(int row, int col, int plane) const { return data[(row * size + col) * kPlanes + plane]; }
    float& at(int row, int col, int plane) { return data[(row * size + col) * kPlanes + plane]; }
};

/// Network input, shape (2, N, N): stones and ko, then move turn.
struct FeaturePlanes {
    static constexpr int kChannels = 2;
    int size = 0;
    std::vector<float> data;

    float at(int channel, int row, int col) const { return data[(channel * size + row) * size + col]; }
    float& at(int channel, int row, int col) { return data[(channel * size + row) * size + col]; }
    bool operator==(const FeaturePlanes&) const = default;
};

GameState new_game(const BoardConfig& config);

/// Legality of a single action without mutating anything.
MoveError check_move(const GameState& state, int action);

/// Binary mask of length N*N+1. Throws Error(InvalidArgument) on a terminal state.
std::vector<uint8_t> legal_mask(const GameState& state);
void legal_mask_into(const GameState& state, std::span<uint8_t> out);

/// In-place transition. Returns MoveError::None on success and leaves the
/// state untouched otherwise.
MoveError play(GameState& state, int action, double* reward = nullptr, int* done = nullptr);

/// Value-returning transition. Throws Error(IllegalMove) naming the violated rule.
StepResult step(const GameState& state, int action);

ScoreResult score(const GameState& state);

/// sign(score) * (5 + 2 log10(1 + |score|)).
double reward_from_score(double score);

/// Black-perspective terminal reward honoring config.shaped_reward.
double terminal_reward(const BoardConfig& config, double score);

Observation observe(const GameState& state);
FeaturePlanes features(const GameState& state);

/// One character per point (`.XO`), one row per line.
std::string dump(const GameState& state);

/// Positional hash key of a stone, deterministic in (seed, point, colour).
uint64_t zobrist_key(uint64_t seed, int point, Stone colour);

// --- game records -----------------------------------------------------------

struct GameRecord {
    BoardConfig config;
    std::vector<int> moves;
};

/// Replays the record and renders it as SGF (FF[4], RU[Chinese]).
std::string to_sgf(const GameRecord& record);

/// Plain-text record: `size N`, `komi K`, `moves a b c ...` lines.
std::string format_record(const GameRecord& record);
GameRecord parse_record(const std::string& text);

/// Final state of a record after replaying every move through the engine.
GameState replay(const GameRecord& record);

}  // namespace qzero::go
