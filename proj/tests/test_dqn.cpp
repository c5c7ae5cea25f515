#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "tlrl/controllers.hpp"
#include "tlrl/dqn.hpp"
#include "tlrl/error.hpp"

using namespace tlrl;
using tlrl::testkit::cross;

namespace {

const JunctionSignal kServeB{Color::Red, Color::Green, 0};

Transition numbered(double r) { return Transition{{r}, 0, r, {r}, false}; }

// Single linear layer with fixed outputs regardless of input.
QNetwork constant_net(std::size_t d_in, std::vector<double> q) {
    Layer l(q.size(), d_in);
    l.b = std::move(q);
    return QNetwork({l});
}

struct LaneCount {
    std::size_t vehicles = 0, halted = 0;
    double wait = 0.0;
};

LaneCount count_lane(const Simulation& sim, std::size_t edge) {
    LaneCount c;
    for (const auto& v : sim.lane(edge)) {
        ++c.vehicles;
        if (v.speed < 0.1) ++c.halted;
        c.wait += v.edge_wait;
    }
    return c;
}

}  // namespace

TEST(Featurize, EmptyJunction) {
    const Simulation sim(cross(), std::vector<Departure>{});
    const auto x = featurize(sim, 0);
    ASSERT_EQ(x.size(), 3u * 4u + 4u);
    EXPECT_EQ(x.size(), state_dim(sim.scenario().network, sim.scenario().network.junctions[0]));
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(x[i], 0.0);
    EXPECT_EQ(x[12], 1.0);
    EXPECT_EQ(x[13], 0.0);
    EXPECT_EQ(x[14], 0.0);
    EXPECT_EQ(x[15], 0.0);
}

TEST(Featurize, SaturatedLane) {
    std::vector<Departure> many;
    for (int i = 0; i < 30; ++i) many.push_back({static_cast<double>(i), 0});
    Simulation sim(cross(90.0, 0.0, 0.0), many);
    for (int t = 0; t < 400; ++t) sim.step({kServeB});
    const auto x = featurize(sim, 0);
    EXPECT_DOUBLE_EQ(x[0], 1.0);
    EXPECT_DOUBLE_EQ(x[1], 1.0);
    EXPECT_DOUBLE_EQ(x[2], 1.0);
    EXPECT_DOUBLE_EQ(x[13], 1.0);  // serving B
}

// Three vehicles queue on a 90 m lane (capacity 12) in front of a red
// light. The lane is checked against a direct count at every step, and at
// the step where the two leaders have halted for 20 s between them.
TEST(Featurize, ScriptedQueue) {
    Simulation sim(cross(90.0, 0.0, 0.0), std::vector<Departure>{{0.0, 0}, {1.0, 0}, {20.0, 0}});
    const std::size_t n_in = *sim.scenario().network.edge_index("n_in");
    ASSERT_EQ(lane_capacity(sim.scenario().network.edges[n_in], sim.scenario().vehicle), 12);
    bool seen = false;
    for (int t = 0; t < 60; ++t) {
        sim.step({kServeB});
        const auto x = featurize(sim, 0);
        const LaneCount c = count_lane(sim, n_in);
        ASSERT_DOUBLE_EQ(x[0], c.vehicles / 12.0);
        ASSERT_DOUBLE_EQ(x[1], c.halted / 12.0);
        ASSERT_DOUBLE_EQ(x[2], std::min(c.wait, 300.0) / 300.0);
        if (c.vehicles == 3 && c.halted == 2 && c.wait == 20.0 && !seen) {
            seen = true;
            EXPECT_DOUBLE_EQ(x[0], 0.25);
            EXPECT_DOUBLE_EQ(x[1], 2.0 / 12.0);
            EXPECT_DOUBLE_EQ(x[2], 20.0 / 300.0);
            for (std::size_t i = 3; i < 12; ++i) EXPECT_EQ(x[i], 0.0);
        }
    }
    EXPECT_TRUE(seen);
}

TEST(Featurize, ComponentsStayInUnitInterval) {
    const Scenario grid = load_scenario_file(testkit::source_path("scenarios/grid2x2.xn"));
    Rng rng(404);
    for (int n = 0; n < 12; ++n) {
        Scenario s = n % 3 == 0 ? grid : cross(rng.uniform(10.0, 200.0), rng.uniform(0.0, 0.8), rng.uniform(0.0, 0.8));
        if (n % 3 == 0) {
            for (auto& r : s.routes) r.rate = rng.uniform(0.0, 0.6);
        }
        Simulation sim(s, rng.next_u64());
        std::vector<Request> req(sim.signalized().size(), Request::ServeA);
        for (int t = 0; t < 600; ++t) {
            SignalAssignment shown;
            for (std::size_t k = 0; k < req.size(); ++k) {
                if (rng.uniform() < 0.05) req[k] = static_cast<Request>(rng.below(3));
                shown.push_back(apply_interlock(req[k], sim.signals()[k], s.network.junctions[sim.signalized()[k]]));
            }
            sim.step(shown);
            for (std::size_t k = 0; k < req.size(); ++k)
                for (const double v : featurize(sim, k)) {
                    ASSERT_GE(v, 0.0);
                    ASSERT_LE(v, 1.0);
                }
        }
    }
}

TEST(Reward, TabulatedExamples) {
    for (const auto mode : {RewardMode::Literal, RewardMode::Balanced})
        EXPECT_EQ(reward({2, 2, 0.0}, mode), 0.0);
    EXPECT_DOUBLE_EQ(reward({5, 0, 0.0}, RewardMode::Literal), 1.0);
    EXPECT_DOUBLE_EQ(reward({5, 0, 0.0}, RewardMode::Balanced), -1.0);
    EXPECT_DOUBLE_EQ(reward({2, 2, 7.0}, RewardMode::Literal), 0.0);
    EXPECT_DOUBLE_EQ(reward({2, 2, 7.0}, RewardMode::Balanced), -1.0);
}

TEST(Reward, WaitingPenaltyBranches) {
    EXPECT_EQ(waiting_penalty(0.0), 0.0);
    EXPECT_EQ(waiting_penalty(0.01), -0.5);
    EXPECT_EQ(waiting_penalty(4.999), -0.5);
    EXPECT_EQ(waiting_penalty(5.0), -1.0);
    EXPECT_EQ(waiting_penalty(300.0), -1.0);
}

TEST(Reward, LiteralClampsNegativeRadicand) {
    EXPECT_EQ(reward({2, 2, 3.0}, RewardMode::Literal), 0.0);       // sqrt(max(0, -0.5))
    EXPECT_DOUBLE_EQ(reward({3, 2, 3.0}, RewardMode::Literal), 0.2 * std::sqrt(0.5));
    EXPECT_DOUBLE_EQ(reward({3, 2, 3.0}, RewardMode::Balanced), -0.7);
}

TEST(Reward, RangesAndBalancedShape) {
    Rng rng(21);
    for (int i = 0; i < 5000; ++i) {
        const int lanes = 1 + static_cast<int>(rng.below(8));
        const int green = static_cast<int>(rng.below(lanes + 1));
        const int red = static_cast<int>(rng.below(lanes - green + 1));
        const double w = rng.below(4) == 0 ? 0.0 : rng.uniform(0.0, 20.0);
        const JunctionView v{green, red, w};
        const double lit = reward(v, RewardMode::Literal);
        const double bal = reward(v, RewardMode::Balanced);
        ASSERT_GE(lit, 0.0);
        ASSERT_LE(lit, 0.2 * lanes + 1e-12);
        ASSERT_GE(bal, -0.2 * lanes - 1.0 - 1e-12);
        ASSERT_LE(bal, 0.0);
        ASSERT_EQ(bal == 0.0, green == red && w == 0.0);
        const JunctionView wider{green + 1, red, w};
        if (green >= red) {
            ASSERT_LT(reward(wider, RewardMode::Balanced), bal);
        }
    }
}

TEST(SelectAction, Greedy) {
    Rng rng(1);
    EXPECT_EQ(select_action(std::vector<double>{1, 3, 2}, 0.0, rng), 1u);
    EXPECT_EQ(select_action(std::vector<double>{2, 2, 0}, 0.0, rng), 0u);
}

TEST(SelectAction, FullExplorationIsUniform) {
    Rng rng(2024);
    const int n = 30000;
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) ++counts[select_action(std::vector<double>{5, 0, 0}, 1.0, rng)];
    const double sigma = std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
    for (const int c : counts) EXPECT_LE(std::abs(c - n / 3.0), 3.0 * sigma);
}

TEST(SelectAction, InvariantUnderPositiveAffineMaps) {
    Rng rng(3), unused(0);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> q = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const double a = rng.uniform(0.01, 100.0), b = rng.uniform(-50.0, 50.0);
        std::vector<double> mapped;
        for (const double v : q) mapped.push_back(a * v + b);
        EXPECT_EQ(select_action(q, 0.0, unused), select_action(mapped, 0.0, unused));
    }
}

TEST(ReplayBuffer, FifoEviction) {
    ReplayBuffer buf(3);
    for (int i = 1; i <= 4; ++i) buf.push(numbered(i));
    ASSERT_EQ(buf.size(), 3u);
    EXPECT_EQ(buf.pushed(), 4u);
    EXPECT_EQ(buf.at(0).reward, 2.0);
    EXPECT_EQ(buf.at(1).reward, 3.0);
    EXPECT_EQ(buf.at(2).reward, 4.0);
}

TEST(ReplayBuffer, EvictsFirstKAfterCapacityPlusK) {
    for (std::size_t cap : {1u, 5u, 17u})
        for (std::size_t k : {0u, 1u, 4u, 40u}) {
            ReplayBuffer buf(cap);
            for (std::size_t i = 0; i < cap + k; ++i) buf.push(numbered(static_cast<double>(i)));
            ASSERT_EQ(buf.size(), cap);
            for (std::size_t i = 0; i < cap; ++i) EXPECT_EQ(buf.at(i).reward, static_cast<double>(k + i));
        }
}

TEST(ReplayBuffer, SampleSizeOne) {
    ReplayBuffer buf(4);
    buf.push(numbered(7));
    Rng rng(5);
    const auto batch = buf.sample(1, rng);
    ASSERT_EQ(batch.size(), 1u);
    EXPECT_EQ(*batch[0], numbered(7));
}

TEST(ReplayBuffer, UnderfilledSampleIsAnError) {
    ReplayBuffer buf(4);
    buf.push(numbered(1));
    Rng rng(5);
    EXPECT_THROW(buf.sample(2, rng), ContractError);
    EXPECT_THROW(buf.push(Transition{{}, 3, 0.0, {}, false}), ContractError);
}

TEST(ReplayBuffer, UniformSamplingChiSquare) {
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) buf.push(numbered(i));
    Rng rng(8675309);
    std::vector<int> counts(10, 0);
    const int n = 100000;
    for (int drawn = 0; drawn < n; drawn += 10)
        for (const auto* t : buf.sample(10, rng)) ++counts[static_cast<std::size_t>(t->reward)];
    double chi2 = 0.0;
    const double expected = n / 10.0;
    for (const int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // Chi-square with 9 degrees of freedom: P(X > 27.877) = 0.001.
    EXPECT_LT(chi2, 27.877);
}

TEST(TdTarget, Examples) {
    const QNetwork target = constant_net(1, {2.0, 1.0, 0.5});
    EXPECT_DOUBLE_EQ(td_target(Transition{{0}, 0, -1.0, {0}, true}, target, 0.95), -1.0);
    EXPECT_DOUBLE_EQ(td_target(Transition{{0}, 1, 0.3, {0}, false}, target, 0.0), 0.3);
    EXPECT_DOUBLE_EQ(td_target(Transition{{0}, 2, 0.0, {0}, false}, target, 0.95), 1.9);
}

TEST(SyncTarget, CopiesOnline) {
    Rng rng(6);
    const QNetwork online = QNetwork::xavier({5, 8, 3}, rng);
    const QNetwork target = sync_target(online);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> x(5);
        for (auto& v : x) v = rng.uniform(-1, 1);
        EXPECT_EQ(forward(online, x), forward(target, x));
    }
}

TEST(SyncTarget, AgentSchedule) {
    DqnHyper hp;
    hp.warmup = 4;
    hp.batch_size = 4;
    hp.target_sync = 3;
    hp.hidden = {6};
    DqnAgent agent(2, hp, 42);
    const QNetwork init = agent.online();
    EXPECT_EQ(agent.target(), init);
    for (int i = 0; i < 3; ++i) {
        agent.remember(Transition{{0.1 * i, 0.5}, static_cast<std::size_t>(i % 3), 1.0, {0.2, 0.1 * i}, i == 2});
        EXPECT_FALSE(agent.learn().has_value());
    }
    agent.remember(Transition{{0.4, 0.4}, 1, -1.0, {0.0, 0.0}, true});
    ASSERT_TRUE(agent.learn().has_value());
    EXPECT_NE(agent.online(), init);
    EXPECT_EQ(agent.target(), init);  // not synced yet
    agent.learn();
    agent.learn();
    EXPECT_EQ(agent.gradient_steps(), 3u);
    EXPECT_EQ(agent.target(), agent.online());
    agent.learn();
    EXPECT_NE(agent.target(), agent.online());
}

TEST(Epsilon, LinearSchedule) {
    const DqnHyper hp;
    EXPECT_DOUBLE_EQ(epsilon_at(hp, 0, 1000), 1.0);
    EXPECT_NEAR(epsilon_at(hp, 350, 1000), 0.525, 1e-12);
    EXPECT_NEAR(epsilon_at(hp, 700, 1000), 0.05, 1e-12);
    EXPECT_NEAR(epsilon_at(hp, 999, 1000), 0.05, 1e-12);
}

TEST(DqnHyper, OverridesAndValidation) {
    DqnHyper hp;
    hp.set("lr", "0.01");
    hp.set("gamma", "0.9");
    hp.set("hidden", "32,16");
    hp.set("decision_interval", "3");
    EXPECT_DOUBLE_EQ(hp.learning_rate, 0.01);
    EXPECT_DOUBLE_EQ(hp.gamma, 0.9);
    EXPECT_EQ(hp.hidden, (std::vector<std::size_t>{32, 16}));
    EXPECT_EQ(hp.decision_interval, 3);
    EXPECT_THROW(hp.set("momentum", "0.9"), ContractError);
    EXPECT_THROW(hp.set("gamma", "1.5"), ContractError);
    EXPECT_THROW(hp.set("batch_size", "many"), ContractError);
    DqnHyper back;
    back.merge(hp.to_json());
    EXPECT_EQ(back.to_json(), hp.to_json());
}

TEST(ActionMapping, ThreeRequests) {
    EXPECT_EQ(action_to_request(0), Request::ServeA);
    EXPECT_EQ(action_to_request(1), Request::ServeB);
    EXPECT_EQ(action_to_request(2), Request::AllRed);
    EXPECT_THROW(action_to_request(3), ContractError);
}

TEST(DqnController, ChecksShapesAndFollowsGreedyChoice) {
    const Scenario s = cross();
    EXPECT_THROW(DqnController(s.network, {constant_net(15, {0, 0, 0})}, 5), ContractError);
    EXPECT_THROW(DqnController(s.network, {}, 5), ContractError);
    DqnController ctrl(s.network, {constant_net(16, {0.0, 1.0, 0.0})}, 5);
    Simulation sim(s, 1);
    SignalMonitor monitor(s.network.junctions[0]);
    bool served_b = false;
    for (int t = 0; t < 40; ++t) {
        const auto shown = ctrl.decide(sim);
        EXPECT_TRUE(monitor.observe(shown[0]).empty());
        served_b = served_b || shown[0].b == Color::Green;
        sim.step(shown);
    }
    EXPECT_TRUE(served_b);
}
