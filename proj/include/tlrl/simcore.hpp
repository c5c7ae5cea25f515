#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "tlrl/metrics.hpp"
#include "tlrl/netmodel.hpp"
#include "tlrl/rng.hpp"
#include "tlrl/signals.hpp"

namespace tlrl {

/// Krauss safe speed: the largest speed from which the vehicle can still
/// stop behind a leader braking at the comfortable deceleration.
///   v_safe = -b*tau + sqrt((b*tau)^2 + v_leader^2 + 2*b*gap), clamped at 0.
double safe_speed(double leader_speed, double gap, const VehicleParams& params);

struct DecelCheck {
    double decel = 0.0;      ///< max(0, (v_prev - v_target) / dt)
    bool emergency = false;  ///< decel exceeds the comfortable deceleration
};

DecelCheck required_decel(double v_prev, double v_target, double dt, const VehicleParams& params);

struct Departure {
    double time = 0.0;
    std::size_t route = 0;

    bool operator==(const Departure&) const = default;
};

/// Poisson arrivals per route over [0, duration), merged and sorted by
/// (time, route). Routes draw in document order from `rng`, each by
/// exponential inter-arrival times.
std::vector<Departure> spawn_schedule(const Scenario& scenario, Rng& rng);

struct Vehicle {
    std::uint64_t id = 0;
    std::size_t route = 0;
    std::size_t leg = 0;      ///< index into the route's edge list
    double position = 0.0;    ///< front bumper, m from edge start
    double speed = 0.0;
    double scheduled_depart = 0.0;
    std::optional<double> actual_depart;
    VehicleCounters counters;
    double edge_wait = 0.0;   ///< halted time accumulated on the current edge
    bool braking_hard = false;
    std::uint64_t stamp = 0;  ///< last step in which the vehicle moved
};

struct EmergencyStop {
    std::uint64_t vehicle = 0;
    double clock = 0.0;
};

struct Insertion {
    std::uint64_t vehicle = 0;
    double actual_depart = 0.0;
};

struct StepEvents {
    std::vector<EmergencyStop> emergency_stops;
    std::vector<std::uint64_t> arrivals;
    std::vector<Insertion> insertions;
};

/// Where an edge sits in the signal layout.
struct EdgeControl {
    int slot = -1;  ///< index into the SignalAssignment, -1 if the edge is not signal-controlled
    int axis = -1;  ///< 0 = A, 1 = B
};

/// Deterministic 1 Hz microscopic simulation of one scenario.
///
/// Every edge holds an ordered queue of vehicles, front (most downstream)
/// first. A step updates vehicles leader-first, so each follower reacts to
/// its leader's new position: edges are visited downstream first, vehicles
/// front to back. Transfers and arrivals happen as soon as the vehicle is
/// moved. Pending departures are inserted at the end of the step.
class Simulation {
public:
    static constexpr double kDt = 1.0;

    /// Demand is drawn from a stream derived from `seed`.
    Simulation(const Scenario& scenario, std::uint64_t seed);
    /// Scripted demand: exactly the given departures.
    Simulation(const Scenario& scenario, std::vector<Departure> schedule);

    /// Advances one step under `assignment`. Throws ContractError (state
    /// untouched) if the assignment has the wrong size or opens both axes.
    StepEvents step(const SignalAssignment& assignment);

    double clock() const noexcept { return clock_; }
    bool finished() const noexcept { return clock_ >= scenario_.duration - 1e-9; }
    const Scenario& scenario() const noexcept { return scenario_; }

    /// Signals of the last step, with `elapsed` already advanced past it.
    const SignalAssignment& signals() const noexcept { return signals_; }
    const std::vector<std::size_t>& signalized() const noexcept { return signalized_; }
    const EdgeControl& control(std::size_t edge) const { return control_.at(edge); }
    const std::deque<Vehicle>& lane(std::size_t edge) const { return lanes_.at(edge); }
    std::size_t edge_of(const Vehicle& v) const { return routes_[v.route][v.leg]; }

    const std::vector<Vehicle>& pending() const noexcept { return pending_; }
    const std::vector<Vehicle>& arrived() const noexcept { return arrived_; }
    std::size_t scheduled_total() const noexcept { return scheduled_total_; }
    std::size_t inserted_total() const noexcept { return inserted_total_; }
    std::size_t arrived_total() const noexcept { return arrived_.size(); }
    std::size_t on_network() const noexcept;

    /// Metrics of every scheduled vehicle (arrived, still driving, never
    /// inserted), ordered by vehicle id.
    std::vector<VehicleMetrics> collect_metrics() const;

private:
    void init_layout();
    void load_schedule(std::vector<Departure> schedule);
    void insert_due(StepEvents& events);
    void move_vehicle(std::deque<Vehicle>& lane, std::size_t index, std::size_t edge, StepEvents& events);
    bool passable(std::size_t edge) const;
    std::vector<std::size_t> downstream_first_order() const;

    Scenario scenario_;
    std::vector<std::vector<std::size_t>> routes_;  // edge indices
    std::vector<std::size_t> signalized_;
    std::vector<EdgeControl> control_;
    std::vector<std::deque<Vehicle>> lanes_;
    std::vector<std::size_t> update_order_;
    std::vector<Vehicle> pending_;  // sorted by (scheduled_depart, id)
    std::vector<Vehicle> arrived_;
    SignalAssignment signals_;
    double clock_ = 0.0;
    std::uint64_t step_count_ = 0;
    std::size_t scheduled_total_ = 0;
    std::size_t inserted_total_ = 0;
};

}  // namespace tlrl
