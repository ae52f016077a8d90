#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <thread>

#include "core/error.hpp"
#include "core/replay.hpp"
#include "test_util.hpp"

namespace qzero {
namespace {

TransitionRecord record_with_action(int action) {
    go::BoardConfig bc;
    bc.size = 3;
    const auto s = go::new_game(bc);
    TransitionRecord r;
    r.state = PackedPlanes::pack(go::features(s));
    r.next_state = r.state;
    r.action = action;
    r.legal_mask = go::legal_mask(s);
    r.next_legal_mask = r.legal_mask;
    return r;
}

TEST(Replay, PackRoundTripsFeatures) {
    Rng rng(2);
    go::BoardConfig bc;
    bc.size = 5;
    for (int i = 0; i < 200; ++i) {
        const auto f = go::features(testing::random_position(bc, rng, static_cast<int>(rng.below(30))));
        EXPECT_EQ(PackedPlanes::pack(f).unpack(), f);
    }
}

TEST(Replay, FifoEviction) {
    ReplayBuffer buf(3);
    EXPECT_EQ(buf.size(), 0u);
    EXPECT_FALSE(buf.is_ready(1));
    EXPECT_TRUE(buf.is_ready(0));
    buf.push(record_with_action(1));
    EXPECT_EQ(buf.size(), 1u);
    for (int a = 2; a <= 4; ++a) buf.push(record_with_action(a));
    EXPECT_EQ(buf.size(), 3u);
    EXPECT_FALSE(buf.is_live(0));
    for (uint64_t s = 1; s <= 3; ++s) EXPECT_TRUE(buf.is_live(s));
    Rng rng(1);
    std::set<int> seen;
    for (const auto& r : buf.sample(200, rng)) seen.insert(r.action);
    EXPECT_EQ(seen, (std::set<int>{2, 3, 4}));
    for (int a = 5; a <= 9; ++a) buf.push(record_with_action(a));
    EXPECT_EQ(buf.size(), 3u);
    EXPECT_EQ(buf.total_pushed(), 9u);
}

TEST(Replay, SingleRecordSamplesRepeat) {
    ReplayBuffer buf(10);
    buf.push(record_with_action(5));
    Rng rng(1);
    const auto batch = buf.sample(4, rng);
    ASSERT_EQ(batch.size(), 4u);
    for (const auto& r : batch) EXPECT_EQ(r.action, 5);
}

TEST(Replay, NotReadyBeforeMinFill) {
    ReplayBuffer buf(10);
    Rng rng(1);
    try {
        buf.sample(1, rng);
        FAIL() << "sampled an empty buffer";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotReady);
    }
    buf.push(record_with_action(0));
    EXPECT_THROW(buf.sample(1, rng, 2), Error);
    EXPECT_THROW(ReplayBuffer(0), Error);
}

TEST(Replay, SamplingIsUniform) {
    ReplayBuffer buf(10);
    for (int a = 0; a < 10; ++a) buf.push(record_with_action(a));
    Rng rng(123);
    std::array<int, 10> counts{};
    const int draws = 200000;
    for (int i = 0; i < draws / 1000; ++i) {
        for (const auto& r : buf.sample(1000, rng)) ++counts[r.action];
    }
    const double sigma = std::sqrt(draws * 0.1 * 0.9);
    for (int c : counts) EXPECT_LT(std::abs(c - draws * 0.1), 5 * sigma);
}

TEST(Replay, ConcurrentProducersKeepExactCount) {
    for (size_t capacity : {50u, 10000u}) {
        ReplayBuffer buf(capacity);
        std::vector<std::thread> producers;
        for (int t = 0; t < 4; ++t) {
            producers.emplace_back([&buf, t] {
                for (int i = 0; i < 500; ++i) {
                    if (i % 5 == 0) {
                        buf.push_episode({record_with_action(t), record_with_action(t)});
                    } else {
                        buf.push(record_with_action(t));
                    }
                }
            });
        }
        Rng rng(4);
        for (int i = 0; i < 100; ++i) {
            if (!buf.is_ready(1)) continue;
            for (const auto& r : buf.sample(8, rng)) EXPECT_TRUE(buf.is_live(r.serial) || buf.total_pushed() > capacity);
        }
        for (auto& p : producers) p.join();
        const size_t total = 4 * (400 + 100 * 2);
        EXPECT_EQ(buf.total_pushed(), total);
        EXPECT_EQ(buf.size(), std::min(total, capacity));
    }
}

TEST(Replay, SampledRecordsAreLive) {
    ReplayBuffer buf(7);
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        buf.push(record_with_action(i % 9));
        for (const auto& r : buf.sample(5, rng)) EXPECT_TRUE(buf.is_live(r.serial));
    }
}

TEST(Replay, AugmentTransformsJointly) {
    Rng rng(6);
    go::BoardConfig bc;
    bc.size = 5;
    for (int trial = 0; trial < 50; ++trial) {
        auto s = testing::random_position(bc, rng, static_cast<int>(rng.below(20)));
        if (s.terminal) continue;
        const int a = testing::random_legal_move(s, rng);
        const auto next = go::step(s, a);
        TransitionRecord r;
        r.state = PackedPlanes::pack(go::features(s));
        r.action = a;
        r.next_state = PackedPlanes::pack(go::features(next.state));
        r.done = static_cast<uint8_t>(next.done);
        r.legal_mask = go::legal_mask(s);
        r.next_legal_mask = next.done ? std::vector<uint8_t>(26, 0) : go::legal_mask(next.state);
        for (int id = 0; id < d4::kOps; ++id) {
            const d4::SymmetryOp op(id);
            const auto t = augment(r, op);
            const auto ts = d4::apply_state(op, s);
            EXPECT_EQ(t.state.unpack(), go::features(ts));
            EXPECT_EQ(t.action, d4::apply_action(op, a, 5));
            EXPECT_EQ(t.legal_mask, go::legal_mask(ts));
            EXPECT_EQ(t.legal_mask[t.action], 1);
            const auto tn = go::step(ts, t.action);
            EXPECT_EQ(t.next_state.unpack(), go::features(tn.state));
            EXPECT_EQ(augment(t, d4::inverse(op)), r);
        }
    }
}

TEST(Replay, SaveLoadRoundTrip) {
    ReplayBuffer buf(4);
    for (int a = 0; a < 6; ++a) {
        auto r = record_with_action(a);
        if (a % 2) r.ignition_outcome = a % 3 ? 5.0f : -5.0f;
        r.reward = 0.5f * a;
        buf.push(r);
    }
    BinaryWriter w;
    buf.save(w);
    ReplayBuffer copy(4);
    BinaryReader rd(w.bytes());
    copy.load(rd);
    EXPECT_TRUE(rd.at_end());
    EXPECT_EQ(copy.size(), 4u);
    EXPECT_EQ(copy.total_pushed(), 6u);
    Rng a(3), b(3);
    EXPECT_EQ(buf.sample(20, a), copy.sample(20, b));

    ReplayBuffer wrong(5);
    BinaryReader rd2(w.bytes());
    EXPECT_THROW(wrong.load(rd2), Error);
    BinaryReader truncated(std::string_view(w.bytes()).substr(0, w.bytes().size() - 3));
    ReplayBuffer again(4);
    EXPECT_THROW(again.load(truncated), Error);
}

}  // namespace
}  // namespace qzero
