#include "core/symmetry.hpp"

#include "core/error.hpp"

namespace qzero::d4 {

namespace {

// 2x2 integer matrices acting on centred (row, col) coordinates.
using Mat = std::array<int, 4>;

constexpr Mat mul(const Mat& a, const Mat& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

constexpr Mat kIdentity{1, 0, 0, 1};
constexpr Mat kRotate{0, 1, -1, 0};  // clockwise: (r, c) -> (c, -r)
constexpr Mat kMirror{1, 0, 0, -1};  // (r, c) -> (r, -c)

constexpr std::array<Mat, kOps> build_matrices() {
    std::array<Mat, kOps> m{};
    for (int id = 0; id < kOps; ++id) {
        Mat acc = id >= 4 ? kMirror : kIdentity;
        for (int k = 0; k < id % 4; ++k) acc = mul(kRotate, acc);
        m[id] = acc;
    }
    return m;
}

constexpr std::array<Mat, kOps> kMatrices = build_matrices();

int find_id(const Mat& m) {
    for (int id = 0; id < kOps; ++id) {
        if (kMatrices[id] == m) return id;
    }
    fail(ErrorCode::Internal, "D4 matrix outside the group");
}

void require_square(size_t values, int size, int channels) {
    if (size <= 0 || values != static_cast<size_t>(size) * size * channels) {
        fail(ErrorCode::InvalidArgument, "symmetry: planes are not square N x N");
    }
}

}  // namespace

SymmetryOp::SymmetryOp(int id) : id_(static_cast<uint8_t>(id)) {
    if (id < 0 || id >= kOps) fail(ErrorCode::InvalidArgument, "symmetry id must be in [0, 7]");
}

SymmetryOp compose(SymmetryOp a, SymmetryOp b) {
    return SymmetryOp(find_id(mul(kMatrices[a.id()], kMatrices[b.id()])));
}

SymmetryOp inverse(SymmetryOp op) {
    for (int id = 0; id < kOps; ++id) {
        if (compose(op, SymmetryOp(id)) == SymmetryOp::identity()) return SymmetryOp(id);
    }
    fail(ErrorCode::Internal, "D4 element without inverse");
}

SymmetryOp sample(Rng& rng) { return SymmetryOp(static_cast<int>(rng.below(kOps))); }

SymmetryOp rotation(int quarter_turns) { return SymmetryOp(((quarter_turns % 4) + 4) % 4); }

std::pair<int, int> map_point(SymmetryOp op, int row, int col, int size) {
    // Doubled centred coordinates keep even board sizes integral.
    const int x = 2 * row - (size - 1);
    const int y = 2 * col - (size - 1);
    const Mat& m = kMatrices[op.id()];
    const int x2 = m[0] * x + m[1] * y;
    const int y2 = m[2] * x + m[3] * y;
    return {(x2 + size - 1) / 2, (y2 + size - 1) / 2};
}

int apply_action(SymmetryOp op, int action, int size) {
    if (action == size * size) return action;
    const auto [r, c] = map_point(op, action / size, action % size, size);
    return r * size + c;
}

std::vector<int> action_permutation(SymmetryOp op, int size) {
    std::vector<int> perm(size * size + 1);
    for (int a = 0; a <= size * size; ++a) perm[a] = apply_action(op, a, size);
    return perm;
}

go::FeaturePlanes apply_planes(SymmetryOp op, const go::FeaturePlanes& planes) {
    const int n = planes.size;
    require_square(planes.data.size(), n, go::FeaturePlanes::kChannels);
    go::FeaturePlanes out;
    out.size = n;
    out.data.resize(planes.data.size());
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const auto [r2, c2] = map_point(op, r, c, n);
            for (int ch = 0; ch < go::FeaturePlanes::kChannels; ++ch) out.at(ch, r2, c2) = planes.at(ch, r, c);
        }
    }
    return out;
}

go::Observation apply_planes(SymmetryOp op, const go::Observation& obs) {
    const int n = obs.size;
    require_square(obs.data.size(), n, go::Observation::kPlanes);
    go::Observation out;
    out.size = n;
    out.data.resize(obs.data.size());
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const auto [r2, c2] = map_point(op, r, c, n);
            for (int k = 0; k < go::Observation::kPlanes; ++k) out.at(r2, c2, k) = obs.at(r, c, k);
        }
    }
    return out;
}

go::GameState apply_state(SymmetryOp op, const go::GameState& state) {
    if (state.config.ko_rule == go::KoRule::PositionalSuperko && state.position_history.size() > 1) {
        fail(ErrorCode::InvalidArgument, "symmetry: cannot transform a superko position history");
    }
    const int n = state.config.size;
    go::GameState out = state;
    out.stones.fill(go::Stone::Empty);
    out.hash = 0;
    for (int p = 0; p < n * n; ++p) {
        const int q = apply_action(op, p, n);
        out.stones[q] = state.stones[p];
        if (state.stones[p] != go::Stone::Empty) out.hash ^= go::zobrist_key(state.config.hash_seed, q, state.stones[p]);
    }
    out.ko_point = state.ko_point >= 0 ? apply_action(op, state.ko_point, n) : -1;
    if (!out.position_history.empty()) out.position_history = {out.hash};
    return out;
}

}  // namespace qzero::d4
