#include <gtest/gtest.h>

#include "core/config.hpp"
#include "core/error.hpp"

namespace qzero {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::Internal;
}

TEST(Schedule, PiecewiseLinearAndClamped) {
    const auto s = Schedule::parse("0:1e-3, 100:1e-4, 300:1e-4");
    EXPECT_EQ(s.at(-10), 1e-3);
    EXPECT_EQ(s.at(0), 1e-3);
    EXPECT_NEAR(s.at(50), 5.5e-4, 1e-18);
    EXPECT_EQ(s.at(100), 1e-4);
    EXPECT_EQ(s.at(200), 1e-4);
    EXPECT_EQ(s.at(100000), 1e-4);
    EXPECT_EQ(Schedule::parse("0.995").at(123456), 0.995);
    EXPECT_EQ(Schedule::parse("10:2").at(0), 2.0);
}

TEST(Schedule, RoundTripAndErrors) {
    const auto s = Schedule::parse("0:5e-05,20000:4e-06");
    EXPECT_EQ(Schedule::parse(s.to_string()), s);
    EXPECT_EQ(code_of([] { Schedule::parse("100:1,50:2"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { Schedule::parse("abc"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { Schedule::parse("0:1,x"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { Schedule::parse("0:nan"); }), ErrorCode::Config);
}

TEST(TrainConfig, ParsesCommentsAndKeys) {
    const auto c = TrainConfig::parse(R"(
# a comment
board.size = 5   # trailing comment
board.komi = 5.5
net.blocks = 2
net.filters = 16
batch_size = 64
lr_schedule = 0:1e-3, 1000:1e-4
mode = sync
softq.alpha = 0.2
board.superko = positional_superko
replay_capacity = 1e5
)");
    EXPECT_EQ(c.board.size, 5);
    EXPECT_EQ(c.net.board_size, 5);
    EXPECT_EQ(c.board.komi, 5.5);
    EXPECT_EQ(c.net.blocks, 2);
    EXPECT_EQ(c.net.filters, 16);
    EXPECT_EQ(c.batch_size, 64);
    EXPECT_EQ(c.replay_capacity, 100000u);
    EXPECT_EQ(c.board.ko_rule, go::KoRule::PositionalSuperko);
    EXPECT_EQ(c.softq.alpha, 0.2);
    EXPECT_NEAR(c.lr.at(500), 5.5e-4, 1e-18);
    c.validate();
}

TEST(TrainConfig, RejectsUnknownKeysAndBadValues) {
    EXPECT_EQ(code_of([] { TrainConfig::parse("bogus = 1"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { TrainConfig::parse("batch_size = many"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { TrainConfig::parse("batch_size = 1.5"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { TrainConfig::parse("mode = turbo"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { TrainConfig::parse("augment = maybe"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { TrainConfig::parse("replay_capacity = -4"); }), ErrorCode::Config);
    EXPECT_EQ(code_of([] { TrainConfig::parse("just words"); }), ErrorCode::Config);
    try {
        TrainConfig::parse("batch_size = many");
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
    }
}

TEST(TrainConfig, TextRoundTripIsExact) {
    TrainConfig c;
    c.board.size = 7;
    c.softq.anneal = softq::AnnealSchedule{0.4, 0.1, 500, false};
    c.lr = Schedule::parse("0:0.1,10:0.01");
    c.mode = TrainMode::Async;
    c.actor_count = 3;
    c.hsg_cumulative = true;
    const auto text = c.to_text();
    const auto back = TrainConfig::parse(text);
    EXPECT_EQ(back.to_text(), text);
    EXPECT_EQ(back.board, c.board);
    ASSERT_TRUE(back.softq.anneal.has_value());
    EXPECT_EQ(back.softq.anneal->horizon_steps, 500);
    EXPECT_FALSE(back.softq.anneal->support_sampling);
    EXPECT_EQ(back.lr, c.lr);
    EXPECT_EQ(back.actor_count, 3);
    EXPECT_TRUE(back.hsg_cumulative);
    // Defaults have annealing off and emit no anneal sub-keys.
    EXPECT_EQ(TrainConfig{}.to_text().find("softq.anneal."), std::string::npos);
}

TEST(TrainConfig, OverridesApplyInOrder) {
    auto c = TrainConfig::parse("batch_size = 64\nseed = 3");
    apply_overrides(c, "batch_size=32\nseed = 9\nbatch_size=16");
    EXPECT_EQ(c.batch_size, 16);
    EXPECT_EQ(c.seed, 9u);
}

TEST(TrainConfig, DerivedDefaultsAndValidation) {
    TrainConfig c;
    c.total_updates = 1000;
    EXPECT_EQ(c.resolved_ignition_updates(), 20);
    c.ignition_updates = 0;
    EXPECT_EQ(c.resolved_ignition_updates(), 0);
    c.batch_size = 32;
    EXPECT_EQ(c.resolved_min_fill(), 320u);
    c.validate();

    auto bad = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        return code_of([&] { c.validate(); });
    };
    EXPECT_EQ(bad([](TrainConfig& c) { c.batch_size = 0; }), ErrorCode::Config);
    EXPECT_EQ(bad([](TrainConfig& c) { c.actor_count = 2; }), ErrorCode::Config);
    EXPECT_EQ(bad([](TrainConfig& c) { c.min_fill = c.replay_capacity + 1; }), ErrorCode::Config);
    EXPECT_EQ(bad([](TrainConfig& c) { c.rho = Schedule(1.5); }), ErrorCode::Config);
    EXPECT_EQ(bad([](TrainConfig& c) { c.lr = Schedule(-1.0); }), ErrorCode::Config);
    EXPECT_EQ(bad([](TrainConfig& c) { c.momentum = 1.0; }), ErrorCode::Config);
    EXPECT_EQ(bad([](TrainConfig& c) { c.softq.alpha = 0.0; }), ErrorCode::Config);
    EXPECT_EQ(bad([](TrainConfig& c) { c.board.size = 1; }), ErrorCode::Config);
    EXPECT_EQ(bad([](TrainConfig& c) { c.publish_every_updates = 0; }), ErrorCode::Config);
}

}  // namespace
}  // namespace qzero
