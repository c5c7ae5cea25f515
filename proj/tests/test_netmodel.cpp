#include <gtest/gtest.h>

#include <functional>
#include <random>

#include <json.hpp>

#include "test_support.hpp"
#include "tlrl/error.hpp"
#include "tlrl/harness.hpp"
#include "tlrl/netmodel.hpp"
#include "tlrl/rng.hpp"

using namespace tlrl;
using tlrl::testkit::cross;
using nlohmann::json;

namespace {

bool any_contains(const std::vector<std::string>& list, const std::string& needle) {
    for (const auto& s : list)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

std::string cross_text() { return serialize(cross()); }

}  // namespace

TEST(LoadScenario, ShippedSingleIntersection) {
    const Scenario s = load_scenario_file(testkit::source_path("scenarios/single.xn"));
    EXPECT_EQ(s.id, "single");
    EXPECT_EQ(s.network.junctions.size(), 9u);
    EXPECT_EQ(s.network.edges.size(), 8u);
    EXPECT_EQ(s.routes.size(), 4u);
    ASSERT_EQ(s.network.signalized_junctions().size(), 1u);
    const Junction& c = s.network.junctions[s.network.signalized_junctions()[0]];
    EXPECT_EQ(c.axis_a.size(), 2u);
    EXPECT_EQ(c.axis_b.size(), 2u);
}

TEST(LoadScenario, ShippedGrid) {
    const Scenario s = load_scenario_file(testkit::source_path("scenarios/grid2x2.xn"));
    EXPECT_EQ(s.network.signalized_junctions().size(), 4u);
    EXPECT_TRUE(validate(s).empty());
}

TEST(LoadScenario, UnknownRouteEdgeIsNamed) {
    json doc = json::parse(cross_text());
    doc["routes"][0]["edges"] = {"n_in", "x9"};
    try {
        load_scenario(doc.dump());
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_TRUE(any_contains(e.violations(), "x9"));
        EXPECT_NE(std::string(e.what()).find("x9"), std::string::npos);
    }
}

TEST(LoadScenario, NegativeLengthIsRejected) {
    json doc = json::parse(cross_text());
    doc["network"]["edges"][0]["length"] = -5;
    try {
        load_scenario(doc.dump());
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_TRUE(any_contains(e.violations(), "length ≥ 10"));
    }
}

TEST(LoadScenario, MalformedDocuments) {
    const std::string text = cross_text();
    EXPECT_THROW(load_scenario(text.substr(0, text.size() / 2)), ParseError);
    EXPECT_THROW(load_scenario("[]"), ParseError);

    json doc = json::parse(text);
    doc["routes"][0]["rate"] = "fast";
    try {
        load_scenario(doc.dump());
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("$.routes[0].rate"), std::string::npos);
    }

    doc = json::parse(text);
    doc.erase("duration");
    EXPECT_THROW(load_scenario(doc.dump()), ParseError);
}

TEST(Validate, WellFormedIntersection) {
    EXPECT_TRUE(validate(cross().network).empty());
    EXPECT_TRUE(validate(cross()).empty());
}

TEST(Validate, EmptyAxisB) {
    Scenario s = cross();
    s.network.junctions[0].axis_b.clear();
    const auto v = validate(s.network);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NE(v[0].find("'C'"), std::string::npos);
}

TEST(Validate, DuplicateEdgeId) {
    Scenario s = cross();
    s.network.edges.push_back(s.network.edges[1]);
    const auto v = validate(s.network);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NE(v[0].find(s.network.edges[1].id), std::string::npos);
}

// Each mutation breaks exactly one invariant and must be reported exactly
// once, naming the entity involved.
TEST(Validate, SingleInvariantMutations) {
    struct Mutation {
        const char* what;
        std::function<void(Scenario&)> apply;
        const char* names;
    };
    const std::vector<Mutation> mutations = {
        {"short edge", [](Scenario& s) { s.network.edges[4].length = 9.5; }, "e_in"},
        {"zero speed", [](Scenario& s) { s.network.edges[4].speed_limit = 0.0; }, "e_in"},
        {"speed above 50", [](Scenario& s) { s.network.edges[5].speed_limit = 50.5; }, "e_out"},
        {"dangling from", [](Scenario& s) { s.network.edges[0].from = "nowhere"; }, "nowhere"},
        {"empty axis A", [](Scenario& s) { s.network.junctions[0].axis_a.clear(); }, "axis-A"},
        {"overlapping axes", [](Scenario& s) { s.network.junctions[0].axis_b.push_back("n_in"); }, "n_in"},
        {"zero yellow", [](Scenario& s) { s.network.junctions[0].yellow = 0; }, "yellow"},
        {"zero min-green", [](Scenario& s) { s.network.junctions[0].min_green = 0; }, "min-green"},
        {"duplicate junction", [](Scenario& s) { s.network.junctions.push_back(Junction{.id = "N"}); }, "'N'"},
        {"axis edge unknown", [](Scenario& s) { s.network.junctions[0].axis_a.push_back("q"); }, "'q'"},
        {"unknown route edge", [](Scenario& s) { s.routes[1].edges[1] = "x9"; }, "x9"},
        {"non-contiguous route", [](Scenario& s) { s.routes[1].edges = {"s_in", "e_in"}; }, "e_in"},
        {"negative rate", [](Scenario& s) { s.routes[2].rate = -0.1; }, "route 2"},
        {"zero duration", [](Scenario& s) { s.duration = 0.0; }, "duration"},
        {"b_e not above b", [](Scenario& s) { s.vehicle.emergency_decel = s.vehicle.decel; }, "b_emergency"},
        {"zero accel", [](Scenario& s) { s.vehicle.accel = 0.0; }, "a must"},
        {"zero decel", [](Scenario& s) { s.vehicle.decel = 0.0; }, "b must"},
    };
    for (const auto& m : mutations) {
        Scenario s = cross();
        m.apply(s);
        const auto v = validate(s);
        ASSERT_EQ(v.size(), 1u) << m.what << ": " << (v.empty() ? "none" : v[0]);
        EXPECT_NE(v[0].find(m.names), std::string::npos) << m.what << ": " << v[0];
        EXPECT_THROW(load_scenario(serialize(s)), ValidationError) << m.what;
    }
}

TEST(ConflictingPairs, TwoByTwo) {
    Junction j{.id = "J", .signalized = true, .axis_a = {"e1", "e2"}, .axis_b = {"e3", "e4"}};
    const std::set<std::pair<std::string, std::string>> expected = {
        {"e1", "e3"}, {"e1", "e4"}, {"e2", "e3"}, {"e2", "e4"}};
    EXPECT_EQ(conflicting_pairs(j), expected);
}

TEST(ConflictingPairs, OneByOne) {
    Junction j{.id = "J", .signalized = true, .axis_a = {"e1"}, .axis_b = {"e2"}};
    const std::set<std::pair<std::string, std::string>> expected = {{"e1", "e2"}};
    EXPECT_EQ(conflicting_pairs(j), expected);
}

TEST(ConflictingPairs, UnsignalizedJunction) {
    EXPECT_THROW(conflicting_pairs(Junction{.id = "N"}), ContractError);
}

TEST(LaneCapacity, FloorOfLengthOverSpacing) {
    const VehicleParams p;  // 5 m + 2.5 m
    EXPECT_EQ(lane_capacity(testkit::edge("e", "a", "b", 90.0), p), 12);
    EXPECT_EQ(lane_capacity(testkit::edge("e", "a", "b", 200.0), p), 26);
    EXPECT_EQ(lane_capacity(testkit::edge("e", "a", "b", 10.0), p), 1);
}

TEST(Serialize, RoundTripOfRandomScenarios) {
    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        Scenario s = cross(rng.uniform(10.0, 400.0), rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.5),
                           rng.uniform(1.0, 5000.0), rng.uniform(0.1, 50.0));
        s.id = "random" + std::to_string(i);
        s.seed = rng.next_u64();
        s.vehicle.accel = rng.uniform(0.5, 4.0);
        s.vehicle.decel = rng.uniform(1.0, 6.0);
        s.vehicle.emergency_decel = s.vehicle.decel + rng.uniform(0.1, 5.0);
        s.vehicle.length = rng.uniform(2.0, 10.0);
        s.vehicle.min_gap = rng.uniform(0.0, 4.0);
        s.vehicle.tau = rng.uniform(0.1, 2.0);
        Junction& c = s.network.junctions[0];
        c.yellow = 1 + static_cast<int>(rng.below(5));
        c.min_green = 1 + static_cast<int>(rng.below(10));
        if (rng.below(2)) {
            const int g = c.min_green + static_cast<int>(rng.below(40));
            c.fixed_plan = FixedTimePlan{g, c.yellow, g + 1};
        }
        if (rng.below(2)) s.train = {{"gamma", rng.uniform(0.5, 0.99)}, {"batch_size", 16}};
        ASSERT_TRUE(validate(s).empty());
        const Scenario back = load_scenario(serialize(s));
        EXPECT_EQ(back, s) << "instance " << i;
        EXPECT_EQ(serialize(back), serialize(s));
    }
}

TEST(Serialize, ShippedScenariosRoundTrip) {
    for (const char* f : {"scenarios/single.xn", "scenarios/grid2x2.xn"}) {
        const Scenario s = load_scenario_file(testkit::source_path(f));
        EXPECT_EQ(load_scenario(serialize(s), "other"), s) << f;
    }
}
