#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tlrl {

/// Krauss car-following parameters shared by every vehicle of a scenario.
struct VehicleParams {
    double accel = 2.6;            ///< a, m/s^2
    double decel = 4.5;            ///< b, comfortable deceleration, m/s^2
    double emergency_decel = 9.0;  ///< b_e, hard braking limit, m/s^2
    double length = 5.0;           ///< m
    double min_gap = 2.5;          ///< m
    double tau = 1.0;              ///< reaction time, s

    bool operator==(const VehicleParams&) const = default;
};

/// Fixed-time signal cycle: A green, yellow, B green, yellow. Seconds.
struct FixedTimePlan {
    int green_a = 30;
    int yellow = 3;
    int green_b = 30;

    int cycle() const noexcept { return green_a + yellow + green_b + yellow; }
    bool operator==(const FixedTimePlan&) const = default;
};

struct Junction {
    std::string id;
    bool signalized = false;
    std::vector<std::string> axis_a;  ///< incoming edge ids served together
    std::vector<std::string> axis_b;
    int yellow = 3;     ///< s
    int min_green = 5;  ///< s
    std::optional<FixedTimePlan> fixed_plan;

    bool operator==(const Junction&) const = default;
};

/// One-lane directed road segment.
struct Edge {
    std::string id;
    std::string from;
    std::string to;
    double length = 0.0;       ///< m
    double speed_limit = 0.0;  ///< m/s

    bool operator==(const Edge&) const = default;
};

/// Maximum number of vehicles that fit on the edge, at least 1.
int lane_capacity(const Edge& edge, const VehicleParams& vehicle);

struct Network {
    std::vector<Junction> junctions;
    std::vector<Edge> edges;

    const Edge* find_edge(std::string_view id) const;
    const Junction* find_junction(std::string_view id) const;
    std::optional<std::size_t> edge_index(std::string_view id) const;
    std::optional<std::size_t> junction_index(std::string_view id) const;

    /// Indices of signalized junctions, in document order.
    std::vector<std::size_t> signalized_junctions() const;

    bool operator==(const Network&) const = default;
};

struct Route {
    std::vector<std::string> edges;
    double rate = 0.0;  ///< vehicles/s

    bool operator==(const Route&) const = default;
};

struct Scenario {
    std::string id;
    Network network;
    std::vector<Route> routes;
    double duration = 0.0;  ///< s
    VehicleParams vehicle;
    std::uint64_t seed = 0;
    /// Optional training hyperparameter block, interpreted by the harness.
    nlohmann::json train = nlohmann::json::object();

    bool operator==(const Scenario&) const = default;
};

/// Network invariant violations, one human-readable entry per offending
/// entity. Empty iff the network is well-formed.
std::vector<std::string> validate(const Network& network);

/// validate(network) plus the route, demand and vehicle invariants.
std::vector<std::string> validate(const Scenario& scenario);

/// All cross-axis (A x B) pairs of incoming edges. Throws ContractError for
/// an unsignalized junction.
std::set<std::pair<std::string, std::string>> conflicting_pairs(const Junction& junction);

/// Parses and validates a scenario document. Throws ParseError on malformed
/// input and ValidationError listing every violated invariant.
Scenario load_scenario(std::string_view text, std::string_view default_id = "scenario");

/// Reads `path` and calls load_scenario with the file stem as default id.
Scenario load_scenario_file(const std::string& path);

/// Canonical document for a scenario; load_scenario(serialize(s)) == s.
std::string serialize(const Scenario& scenario);

}  // namespace tlrl
