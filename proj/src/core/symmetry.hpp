#pragma once

// The dihedral group D4 acting on square boards.
//
// Operation id = k + 4*m: mirror left-right first when m = 1, then rotate
// clockwise by k quarter turns. PASS is a fixed point of every operation.

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "core/go_engine.hpp"
#include "core/rng.hpp"

namespace qzero::d4 {

inline constexpr int kOps = 8;

class SymmetryOp {
public:
    constexpr SymmetryOp() = default;
    explicit SymmetryOp(int id);

    static constexpr SymmetryOp identity() { return SymmetryOp(); }

    constexpr int id() const { return id_; }
    constexpr int quarter_turns() const { return id_ % 4; }
    constexpr bool mirrored() const { return id_ >= 4; }

    constexpr bool operator==(const SymmetryOp&) const = default;

private:
    uint8_t id_ = 0;
};

/// compose(a, b) applies b first, then a.
SymmetryOp compose(SymmetryOp a, SymmetryOp b);
SymmetryOp inverse(SymmetryOp op);
SymmetryOp sample(Rng& rng);
SymmetryOp rotation(int quarter_turns);

std::pair<int, int> map_point(SymmetryOp op, int row, int col, int size);
int apply_action(SymmetryOp op, int action, int size);

/// Index permutation over the N*N+1 action vector: out[perm[i]] = in[i].
std::vector<int> action_permutation(SymmetryOp op, int size);

go::FeaturePlanes apply_planes(SymmetryOp op, const go::FeaturePlanes& planes);
go::Observation apply_planes(SymmetryOp op, const go::Observation& obs);

/// Transforms an action-indexed vector (mask, Q-values, policy).
template <typename T>
std::vector<T> apply_vector(SymmetryOp op, std::span<const T> values, int size) {
    std::vector<T> out(values.size());
    const int points = size * size;
    for (int p = 0; p < points; ++p) out[apply_action(op, p, size)] = values[p];
    out[points] = values[points];
    return out;
}

/// Whole-position transform. Positions carrying a superko history are rejected
/// because the stored hashes cannot be remapped.
go::GameState apply_state(SymmetryOp op, const go::GameState& state);

}  // namespace qzero::d4
