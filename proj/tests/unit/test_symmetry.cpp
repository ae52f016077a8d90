#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "core/error.hpp"
#include "core/symmetry.hpp"
#include "test_util.hpp"

namespace qzero {
namespace {

using d4::SymmetryOp;

// Reference transform written directly on (row, col): mirror, then k clockwise turns.
std::pair<int, int> reference_map(int id, int r, int c, int n) {
    if (id >= 4) c = n - 1 - c;
    for (int k = 0; k < id % 4; ++k) {
        const int r2 = c;
        const int c2 = n - 1 - r;
        r = r2;
        c = c2;
    }
    return {r, c};
}

TEST(Symmetry, MatchesReferencePermutationOnSeveralSizes) {
    for (int n : {2, 3, 4, 5, 9}) {
        for (int id = 0; id < d4::kOps; ++id) {
            for (int r = 0; r < n; ++r) {
                for (int c = 0; c < n; ++c) EXPECT_EQ(d4::map_point(SymmetryOp(id), r, c, n), reference_map(id, r, c, n));
            }
        }
    }
}

TEST(Symmetry, ClockwiseQuarterTurnOnThreeByThree) {
    EXPECT_EQ(d4::map_point(d4::rotation(1), 0, 0, 3), std::make_pair(0, 2));
    EXPECT_EQ(d4::map_point(d4::rotation(1), 0, 2, 3), std::make_pair(2, 2));
    EXPECT_EQ(d4::map_point(d4::rotation(1), 1, 1, 3), std::make_pair(1, 1));
}

TEST(Symmetry, GroupAxioms) {
    const SymmetryOp e = SymmetryOp::identity();
    const SymmetryOp r = d4::rotation(1);
    EXPECT_EQ(d4::compose(r, d4::compose(r, d4::compose(r, r))), e);
    std::set<int> ids;
    for (int a = 0; a < d4::kOps; ++a) {
        const SymmetryOp op(a);
        EXPECT_EQ(d4::compose(op, d4::inverse(op)), e);
        EXPECT_EQ(d4::compose(d4::inverse(op), op), e);
        EXPECT_EQ(d4::compose(op, e), op);
        for (int b = 0; b < d4::kOps; ++b) {
            const int c = d4::compose(op, SymmetryOp(b)).id();
            EXPECT_GE(c, 0);
            EXPECT_LT(c, d4::kOps);
            // compose(a, b) acts as b then a.
            for (int p = 0; p < 25; ++p) {
                EXPECT_EQ(d4::apply_action(SymmetryOp(c), p, 5), d4::apply_action(op, d4::apply_action(SymmetryOp(b), p, 5), 5));
            }
        }
        ids.insert(a);
    }
    EXPECT_EQ(ids.size(), 8u);
    EXPECT_THROW(SymmetryOp(8), Error);
    EXPECT_THROW(SymmetryOp(-1), Error);
}

TEST(Symmetry, PassAndCentreAreFixed) {
    for (int id = 0; id < d4::kOps; ++id) {
        EXPECT_EQ(d4::apply_action(SymmetryOp(id), 25, 5), 25);
        EXPECT_EQ(d4::apply_action(SymmetryOp(id), 12, 5), 12);
        EXPECT_EQ(d4::apply_action(SymmetryOp(id), 40, 9), 40);
    }
    for (int a = 0; a <= 25; ++a) EXPECT_EQ(d4::apply_action(SymmetryOp::identity(), a, 5), a);
}

TEST(Symmetry, PlanesAndActionsShareOnePermutation) {
    for (int id = 0; id < d4::kOps; ++id) {
        const SymmetryOp op(id);
        for (int p = 0; p < 16; ++p) {
            go::FeaturePlanes f;
            f.size = 4;
            f.data.assign(32, 0.0f);
            f.data[p] = 1.0f;
            const auto g = d4::apply_planes(op, f);
            const int q = d4::apply_action(op, p, 4);
            for (int i = 0; i < 16; ++i) EXPECT_EQ(g.data[i], i == q ? 1.0f : 0.0f);
        }
    }
}

TEST(Symmetry, FourQuarterTurnsRestorePlanes) {
    Rng rng(3);
    const auto s = testing::random_position({.size = 7}, rng, 20);
    const auto f = go::features(s);
    const auto o = go::observe(s);
    auto g = f;
    auto p = o;
    for (int k = 0; k < 4; ++k) {
        g = d4::apply_planes(d4::rotation(1), g);
        p = d4::apply_planes(d4::rotation(1), p);
    }
    EXPECT_EQ(g, f);
    EXPECT_EQ(p.data, o.data);
    EXPECT_EQ(d4::apply_planes(SymmetryOp::identity(), f), f);
}

TEST(Symmetry, RejectsNonSquarePlanes) {
    go::FeaturePlanes f;
    f.size = 3;
    f.data.assign(17, 0.0f);
    EXPECT_THROW(d4::apply_planes(SymmetryOp(1), f), Error);
    go::Observation o;
    o.size = 3;
    o.data.assign(50, 0.0f);
    EXPECT_THROW(d4::apply_planes(SymmetryOp(1), o), Error);
}

TEST(Symmetry, SamplingIsUniform) {
    Rng rng(77);
    std::array<int, 8> counts{};
    const int draws = 80000;
    for (int i = 0; i < draws; ++i) ++counts[d4::sample(rng).id()];
    const double mean = draws / 8.0;
    const double sigma = std::sqrt(draws * (1.0 / 8) * (7.0 / 8));
    for (int c : counts) EXPECT_LT(std::abs(c - mean), 5 * sigma);
}

TEST(Symmetry, MaskAndScoreAreEquivariant) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = testing::random_position({.size = 5}, rng, static_cast<int>(rng.below(40)));
        if (s.terminal) continue;
        const auto mask = go::legal_mask(s);
        const double sc = go::score(s).score;
        for (int id = 0; id < d4::kOps; ++id) {
            const auto t = d4::apply_state(SymmetryOp(id), s);
            EXPECT_EQ(go::legal_mask(t), d4::apply_vector<uint8_t>(SymmetryOp(id), mask, 5));
            EXPECT_EQ(go::score(t).score, sc);
            EXPECT_EQ(go::features(t), d4::apply_planes(SymmetryOp(id), go::features(s)));
        }
    }
}

}  // namespace
}  // namespace qzero
