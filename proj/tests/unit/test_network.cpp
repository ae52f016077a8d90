#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <tuple>

#include "core/error.hpp"
#include "core/network.hpp"
#include "net_oracle.hpp"
#include "test_util.hpp"

namespace qzero {
namespace {

nn::NetConfig net(int n, int blocks, int filters) {
    nn::NetConfig c;
    c.board_size = n;
    c.blocks = blocks;
    c.filters = filters;
    return c;
}

std::vector<go::FeaturePlanes> random_planes(int n, int count, uint64_t seed) {
    Rng rng(seed);
    std::vector<go::FeaturePlanes> out;
    go::BoardConfig bc;
    bc.size = n;
    for (int i = 0; i < count; ++i) out.push_back(go::features(testing::random_position(bc, rng, static_cast<int>(rng.below(3 * n)))));
    return out;
}

template <typename T>
void randomize_biases(nn::BasicParameters<T>& p, uint64_t seed, double scale) {
    Rng rng(seed);
    for (const auto& s : p.specs) {
        if (s.is_weight) continue;
        for (size_t i = 0; i < s.count; ++i) p.values[s.offset + i] = static_cast<T>(scale * rng.normal());
    }
}

TEST(Network, ParameterCountMatchesClosedForm) {
    for (auto [n, b, f] : {std::tuple{9, 4, 32}, std::tuple{5, 1, 4}, std::tuple{19, 19, 256}}) {
        const size_t p = static_cast<size_t>(n) * n;
        const size_t expected = (9 * 2 * f + f) + b * 2 * (9 * f * f + f) + (2 * f + 2) + (p + 1) * 2 * p + (p + 1);
        EXPECT_EQ(nn::parameter_count(net(n, b, f)), expected);
    }
    const auto specs = nn::layer_specs(net(9, 4, 32));
    EXPECT_EQ(specs.size(), 2u + 4u * 4u + 4u);
    EXPECT_EQ(specs.back().shape, (std::vector<int>{82}));
}

TEST(Network, InitIsDeterministicInSeed) {
    const auto a = nn::init<float>(net(9, 4, 32), 0);
    const auto b = nn::init<float>(net(9, 4, 32), 0);
    const auto c = nn::init<float>(net(9, 4, 32), 1);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
    for (const auto& s : a.specs) {
        if (!s.is_weight) {
            for (size_t i = 0; i < s.count; ++i) EXPECT_EQ(a.values[s.offset + i], 0.0f);
        }
    }
    EXPECT_THROW(nn::init<float>(net(9, 0, 32), 0), Error);
}

TEST(Network, ZeroParametersGiveZeroOutput) {
    const auto p = nn::zeros<float>(net(5, 2, 8));
    for (const auto& q : nn::forward(p, random_planes(5, 3, 1))) {
        for (float v : q) EXPECT_EQ(v, 0.0f);
    }
}

TEST(Network, HandSetSingleFilterNet) {
    auto p = nn::zeros<double>(net(3, 1, 1));
    // Centre taps only: every 3x3 conv acts pointwise.
    p.tensor("input.conv.weight")[4 * 2 + 0] = 1.0;
    p.tensor("block0.conv1.weight")[4] = 2.0;
    p.tensor("block0.conv2.weight")[4] = 0.5;
    p.tensor("head.conv.weight")[0] = 1.0;
    p.tensor("head.conv.weight")[1] = -1.0;
    p.tensor("head.conv.bias")[1] = 1.0;
    auto fc = p.tensor("head.fc.weight");
    for (int a = 0; a < 10; ++a) fc[a * 18 + a] = 1.0;
    for (double& b : p.tensor("head.fc.bias")) b = 0.25;

    go::FeaturePlanes f;
    f.size = 3;
    f.data.assign(18, 0.0f);
    f.data[4] = 1.0f;   // white stone at the centre
    f.data[0] = -1.0f;  // black stone in the corner, removed by the first relu

    // a0 = 1 at the centre; h = 2; y = relu(0.5 * 2 + 1) = 2.
    // head ch0 = 2 at the centre, ch1 = relu(1 - y) = 0 at the centre and 1 elsewhere.
    // q[a] = flat[a] + 0.25, flat = (ch0 points, ch1 points).
    const std::vector<double> expected = {0.25, 0.25, 0.25, 0.25, 2.25, 0.25, 0.25, 0.25, 0.25, 1.25};
    nn::Workspace<double> ws;
    std::vector<double> q;
    ws.forward(p, nn::InputBatch::from({f}), q);
    ASSERT_EQ(q.size(), 10u);
    for (int a = 0; a < 10; ++a) EXPECT_DOUBLE_EQ(q[a], expected[a]);
}

TEST(Network, MatchesNaiveReferenceForward) {
    auto p = nn::init<double>(net(5, 2, 3), 42);
    randomize_biases(p, 43, 0.2);
    const auto planes = random_planes(5, 4, 7);
    nn::Workspace<double> ws;
    std::vector<double> q;
    ws.forward(p, nn::InputBatch::from(planes), q);
    for (size_t b = 0; b < planes.size(); ++b) {
        const auto ref = testing::reference_forward(p, planes[b]);
        for (int a = 0; a < 26; ++a) EXPECT_NEAR(q[b * 26 + a], ref.q[a], 1e-12);
    }
}

TEST(Network, BatchOrderDoesNotChangeOutputs) {
    const auto p = nn::init<float>(net(5, 2, 8), 3);
    auto planes = random_planes(5, 5, 8);
    const auto a = nn::forward(p, planes);
    std::rotate(planes.begin(), planes.begin() + 2, planes.end());
    const auto b = nn::forward(p, planes);
    for (size_t i = 0; i < planes.size(); ++i) {
        const auto& x = a[(i + 2) % planes.size()];
        for (size_t k = 0; k < x.size(); ++k) EXPECT_EQ(b[i][k], x[k]);
    }
    const auto dup = nn::forward(p, {planes[0], planes[0]});
    EXPECT_EQ(dup[0], dup[1]);
}

TEST(Network, ResultsDoNotDependOnBufferAddress) {
    const auto p = nn::init<float>(net(5, 2, 8), 4);
    const auto planes = random_planes(5, 4, 9);
    const auto in = nn::InputBatch::from(planes);
    const std::vector<int> actions{0, 7, 25, 3};
    const std::vector<float> y{1.0f, -1.0f, 0.5f, 2.0f};
    nn::Workspace<float> ws0;
    nn::Gradients g0;
    const auto r0 = ws0.loss_and_grad(p, in, actions, y, 1e-4, g0);
    std::vector<std::vector<char>> pads;
    for (int i = 1; i < 8; ++i) {
        pads.emplace_back(i * 8);  // shift the heap between copies
        const auto copy = p;
        EXPECT_EQ(reinterpret_cast<uintptr_t>(copy.values.data()) % 64, 0u);
        nn::Workspace<float> ws;
        nn::Gradients g;
        const auto r = ws.loss_and_grad(copy, in, actions, y, 1e-4, g);
        EXPECT_EQ(r.loss, r0.loss);
        EXPECT_EQ(g.values, g0.values);
    }
}

TEST(Network, RejectsShapeMismatch) {
    const auto p = nn::init<float>(net(5, 1, 4), 0);
    EXPECT_THROW(nn::forward(p, random_planes(7, 1, 1)), Error);
    EXPECT_THROW(nn::forward(p, {}), Error);
}

TEST(Network, ZeroLossAtCurrentQ) {
    const auto p = nn::init<double>(net(5, 1, 4), 5);
    const auto planes = random_planes(5, 3, 2);
    const auto batch = nn::InputBatch::from(planes);
    const std::vector<int> actions = {0, 25, 13};
    std::vector<double> targets;
    for (size_t b = 0; b < planes.size(); ++b) targets.push_back(testing::reference_forward(p, planes[b]).q[actions[b]]);
    nn::BasicGradients<double> g;
    const auto r = nn::loss_and_grad<double>(p, batch, actions, targets, 0.0, g);
    EXPECT_NEAR(r.loss, 0.0, 1e-20);
    for (double v : g.values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Network, LastLayerGradientIsChainRule) {
    auto p = nn::init<double>(net(5, 1, 4), 9);
    randomize_biases(p, 10, 0.1);
    const auto planes = random_planes(5, 1, 4);
    const auto ref = testing::reference_forward(p, planes[0]);
    const int action = 7;
    const double y = ref.q[action] + 1.5;
    nn::BasicGradients<double> g;
    nn::loss_and_grad<double>(p, nn::InputBatch::from(planes), std::vector<int>{action}, std::vector<double>{y}, 0.0, g);
    const auto fc = g.tensor("head.fc.weight");
    for (int a = 0; a < 26; ++a) {
        for (int j = 0; j < 50; ++j) {
            const double expected = a == action ? 2.0 * (ref.q[action] - y) * ref.head[j] : 0.0;
            EXPECT_NEAR(fc[a * 50 + j], expected, 1e-12);
        }
    }
    EXPECT_NEAR(g.tensor("head.fc.bias")[action], 2.0 * (ref.q[action] - y), 1e-12);
}

TEST(Network, GradientMatchesFiniteDifferences) {
    auto p = nn::init<double>(net(5, 1, 4), 21);
    randomize_biases(p, 22, 0.1);
    const auto planes = random_planes(5, 3, 23);
    Rng rng(24);
    const auto report = testing::gradient_check(p, nn::InputBatch::from(planes), {3, 25, 12}, {1.0, -2.0, 0.5}, 1e-3, rng, 250);
    EXPECT_EQ(report.failed, 0) << "worst relative error " << report.worst_relative;
    EXPECT_EQ(report.checked, 250);
}

TEST(Network, NonFiniteTargetIsRejected) {
    const auto p = nn::init<float>(net(5, 1, 4), 0);
    nn::Gradients g;
    const std::vector<float> bad = {NAN};
    EXPECT_THROW(nn::loss_and_grad<float>(p, nn::InputBatch::from(random_planes(5, 1, 0)), std::vector<int>{0}, bad, 0.0, g), Error);
}

TEST(Network, SgdArithmetic) {
    nn::ParametersD w = nn::zeros<double>(net(3, 1, 1));
    w.values.assign(w.values.size(), 1.0);
    nn::BasicGradients<double> g = w;
    // f(w) = w^2 has gradient 2w.
    for (double& v : g.values) v = 2.0;
    nn::SgdOptimizer<double> opt;
    opt.step(w, g, 0.1, 0.0);
    for (double v : w.values) EXPECT_NEAR(v, 0.8, 1e-15);
    EXPECT_EQ(w.version, 1u);
    const auto before = w.values;
    opt.step(w, g, 0.0, 0.0);
    EXPECT_EQ(w.values, before);
    EXPECT_EQ(w.version, 2u);

    nn::SgdOptimizer<double> heavy;
    nn::ParametersD m = nn::zeros<double>(net(3, 1, 1));
    heavy.step(m, g, 0.1, 0.9);
    heavy.step(m, g, 0.1, 0.9);
    // v1 = 2, v2 = 0.9 * 2 + 2 = 3.8; w = -0.1 * (2 + 3.8).
    EXPECT_NEAR(m.values[0], -0.58, 1e-12);
}

TEST(Network, OverfitsFixedBatch) {
    auto p = nn::init<float>(net(5, 1, 8), 31);
    const auto planes = random_planes(5, 32, 32);
    const auto batch = nn::InputBatch::from(planes);
    Rng rng(33);
    std::vector<int> actions;
    std::vector<float> targets;
    for (int i = 0; i < 32; ++i) {
        actions.push_back(static_cast<int>(rng.below(26)));
        targets.push_back(static_cast<float>(rng.uniform(-5, 5)));
    }
    nn::Workspace<float> ws;
    nn::Gradients g;
    nn::SgdOptimizer<float> opt;
    std::vector<double> losses;
    for (int step = 0; step < 200; ++step) {
        losses.push_back(ws.loss_and_grad(p, batch, actions, targets, 0.0, g).loss);
        opt.step(p, g, 2e-3, 0.0);
    }
    for (size_t i = 11; i < losses.size(); ++i) EXPECT_LE(losses[i], losses[i - 1]) << "step " << i;
    EXPECT_LT(losses.back(), 0.5 * losses.front());
}

TEST(Network, L2ShrinksEveryWeight) {
    auto p = nn::init<double>(net(5, 1, 4), 13);
    randomize_biases(p, 14, 0.1);
    const auto planes = random_planes(5, 2, 15);
    const std::vector<int> actions = {1, 2};
    std::vector<double> targets;
    for (size_t b = 0; b < 2; ++b) targets.push_back(testing::reference_forward(p, planes[b]).q[actions[b]]);
    nn::BasicGradients<double> g;
    nn::loss_and_grad<double>(p, nn::InputBatch::from(planes), actions, targets, 0.1, g);
    const auto before = p;
    nn::SgdOptimizer<double> opt;
    opt.step(p, g, 0.1, 0.0);
    for (const auto& s : p.specs) {
        for (size_t i = 0; i < s.count; ++i) {
            const double w0 = before.values[s.offset + i], w1 = p.values[s.offset + i];
            if (s.is_weight && w0 != 0.0) {
                EXPECT_LT(std::abs(w1), std::abs(w0)) << s.name;
            } else if (!s.is_weight) {
                EXPECT_NEAR(w1, w0, 1e-12) << s.name;
            }
        }
    }
}

TEST(Network, PolyakAveraging) {
    auto target = nn::zeros<float>(net(3, 1, 1));
    auto online = target;
    target.values.assign(target.size(), 2.0f);
    online.values.assign(online.size(), 4.0f);
    auto t = target;
    nn::polyak(t, online, 1.0);
    EXPECT_EQ(t.values, target.values);
    nn::polyak(t, online, 0.5);
    for (float v : t.values) EXPECT_EQ(v, 3.0f);
    nn::polyak(t, online, 0.0);
    EXPECT_EQ(t.values, online.values);
    EXPECT_THROW(nn::polyak(t, online, 1.5), Error);
    auto other = nn::zeros<float>(net(5, 1, 1));
    EXPECT_THROW(nn::polyak(t, other, 0.5), Error);
}

TEST(Network, SerializationRoundTrip) {
    auto p = nn::init<float>(net(5, 2, 8), 17);
    p.version = 1234;
    const auto bytes = nn::serialize(p);
    const auto q = nn::deserialize<float>(bytes);
    EXPECT_EQ(q.values, p.values);
    EXPECT_EQ(q.version, 1234u);
    EXPECT_EQ(q.config, p.config);
    EXPECT_EQ(nn::serialize(q), bytes);

    const auto d = nn::deserialize<double>(nn::serialize(nn::convert<double>(p)));
    EXPECT_EQ(nn::convert<float>(d).values, p.values);
}

ErrorCode error_of(const std::string& bytes) {
    try {
        nn::deserialize<float>(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Internal;
}

TEST(Network, SerializationErrors) {
    const auto bytes = nn::serialize(nn::init<float>(net(5, 1, 4), 1));
    EXPECT_EQ(error_of(bytes.substr(0, bytes.size() / 2)), ErrorCode::Corrupt);
    EXPECT_EQ(error_of(bytes.substr(0, 10)), ErrorCode::Corrupt);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_EQ(error_of(bad_magic), ErrorCode::Corrupt);
    std::string flipped = bytes;
    flipped[flipped.size() - 20] ^= 0x40;
    EXPECT_EQ(error_of(flipped), ErrorCode::Corrupt);
    // Header claims a 7x7 board while the arrays were written for 5x5.
    std::string wrong_size = bytes;
    wrong_size[12] = 7;
    EXPECT_EQ(error_of(wrong_size), ErrorCode::Config);
    std::string bad_blocks = bytes;
    bad_blocks[16] = 0;
    EXPECT_EQ(error_of(bad_blocks), ErrorCode::Config);
}

}  // namespace
}  // namespace qzero
