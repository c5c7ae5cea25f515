#include "tlrl/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlrl/error.hpp"

namespace tlrl {

const char* to_string(Color c) noexcept {
    switch (c) {
        case Color::Red: return "red";
        case Color::Yellow: return "yellow";
        case Color::Green: return "green";
    }
    return "?";
}

double safe_speed(double leader_speed, double gap, const VehicleParams& p) {
    const double bt = p.decel * p.tau;
    const double v = -bt + std::sqrt(bt * bt + leader_speed * leader_speed + 2.0 * p.decel * gap);
    return std::max(0.0, v);
}

DecelCheck required_decel(double v_prev, double v_target, double dt, const VehicleParams& p) {
    const double decel = std::max(0.0, (v_prev - v_target) / dt);
    return {decel, decel > p.decel};
}

std::vector<Departure> spawn_schedule(const Scenario& scenario, Rng& rng) {
    std::vector<Departure> out;
    for (std::size_t r = 0; r < scenario.routes.size(); ++r) {
        const double rate = scenario.routes[r].rate;
        if (!(rate > 0.0)) continue;
        for (double t = rng.exponential(rate); t < scenario.duration; t += rng.exponential(rate))
            out.push_back({t, r});
    }
    std::stable_sort(out.begin(), out.end(), [](const Departure& x, const Departure& y) {
        return x.time != y.time ? x.time < y.time : x.route < y.route;
    });
    return out;
}

Simulation::Simulation(const Scenario& scenario, std::uint64_t seed) : scenario_(scenario) {
    init_layout();
    Rng rng(derive_seed(seed, streams::kDemand, 0));
    load_schedule(spawn_schedule(scenario_, rng));
}

Simulation::Simulation(const Scenario& scenario, std::vector<Departure> schedule) : scenario_(scenario) {
    init_layout();
    for (const auto& d : schedule)
        if (d.route >= routes_.size()) throw ContractError("departure references route " + std::to_string(d.route));
    std::stable_sort(schedule.begin(), schedule.end(), [](const Departure& x, const Departure& y) {
        return x.time != y.time ? x.time < y.time : x.route < y.route;
    });
    load_schedule(std::move(schedule));
}

void Simulation::init_layout() {
    const Network& net = scenario_.network;
    signalized_ = net.signalized_junctions();
    control_.assign(net.edges.size(), EdgeControl{});
    for (std::size_t slot = 0; slot < signalized_.size(); ++slot) {
        const Junction& j = net.junctions[signalized_[slot]];
        for (int axis = 0; axis < 2; ++axis)
            for (const auto& id : axis == 0 ? j.axis_a : j.axis_b)
                if (const auto e = net.edge_index(id)) control_[*e] = {static_cast<int>(slot), axis};
    }
    for (const auto& r : scenario_.routes) {
        std::vector<std::size_t> idx;
        for (const auto& id : r.edges) {
            const auto e = net.edge_index(id);
            if (!e) throw ContractError("route references unknown edge '" + id + "'");
            idx.push_back(*e);
        }
        if (idx.empty()) throw ContractError("route with no edges");
        routes_.push_back(std::move(idx));
    }
    lanes_.resize(net.edges.size());
    update_order_ = downstream_first_order();
    signals_.assign(signalized_.size(), JunctionSignal{});
}

void Simulation::load_schedule(std::vector<Departure> schedule) {
    std::uint64_t next_id = 0;
    for (const auto& d : schedule) {
        Vehicle v;
        v.id = next_id++;
        v.route = d.route;
        v.scheduled_depart = d.time;
        pending_.push_back(std::move(v));
    }
    scheduled_total_ = pending_.size();
    StepEvents ignored;
    insert_due(ignored);
}

std::vector<std::size_t> Simulation::downstream_first_order() const {
    // Post-order DFS over the route successor relation puts every edge after
    // the edges its vehicles enter next, so cross-edge leaders have already
    // moved when their followers are updated. Cycles are broken arbitrarily.
    const std::size_t n = lanes_.size();
    std::vector<std::vector<std::size_t>> next(n);
    for (const auto& r : routes_)
        for (std::size_t k = 0; k + 1 < r.size(); ++k) next[r[k]].push_back(r[k + 1]);
    for (auto& succ : next) {
        std::sort(succ.begin(), succ.end());
        succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
    }
    std::vector<std::size_t> order;
    std::vector<char> state(n, 0);  // 0 new, 1 open, 2 done
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t root = 0; root < n; ++root) {
        if (state[root]) continue;
        stack.push_back({root, 0});
        state[root] = 1;
        while (!stack.empty()) {
            auto& [e, i] = stack.back();
            if (i < next[e].size()) {
                const std::size_t s = next[e][i++];
                if (!state[s]) {
                    state[s] = 1;
                    stack.push_back({s, 0});
                }
            } else {
                state[e] = 2;
                order.push_back(e);
                stack.pop_back();
            }
        }
    }
    return order;
}

std::size_t Simulation::on_network() const noexcept {
    std::size_t n = 0;
    for (const auto& l : lanes_) n += l.size();
    return n;
}

bool Simulation::passable(std::size_t edge) const {
    const EdgeControl& c = control_[edge];
    if (c.slot < 0) return true;
    const JunctionSignal& s = signals_[static_cast<std::size_t>(c.slot)];
    return (c.axis == 0 ? s.a : s.b) == Color::Green;
}

StepEvents Simulation::step(const SignalAssignment& assignment) {
    if (assignment.size() != signalized_.size())
        throw ContractError("signal assignment has " + std::to_string(assignment.size()) + " entries, expected " +
                            std::to_string(signalized_.size()));
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (!interlock_ok(assignment[i]))
            throw ContractError("signal assignment opens both axes at junction '" +
                                scenario_.network.junctions[signalized_[i]].id + "'");

    signals_ = assignment;
    ++step_count_;
    StepEvents events;

    for (const std::size_t e : update_order_) {
        auto& lane = lanes_[e];
        std::size_t i = 0;
        while (i < lane.size()) {
            if (lane[i].stamp == step_count_) {
                ++i;
                continue;
            }
            const std::size_t before = lane.size();
            move_vehicle(lane, i, e, events);
            // Only the front vehicle can leave; it is replaced by the next one.
            if (lane.size() == before) ++i;
        }
    }

    clock_ += kDt;
    for (auto& s : signals_) ++s.elapsed;
    insert_due(events);
    return events;
}

void Simulation::move_vehicle(std::deque<Vehicle>& lane, std::size_t index, std::size_t edge_idx,
                              StepEvents& events) {
    const VehicleParams& p = scenario_.vehicle;
    const Edge& edge = scenario_.network.edges[edge_idx];
    Vehicle& v = lane[index];
    const auto& route = routes_[v.route];
    const bool last_leg = v.leg + 1 == route.size();

    double target = std::min(edge.speed_limit, v.speed + p.accel * kDt);
    double hard = std::numeric_limits<double>::infinity();  // no-overlap bound on the new speed

    auto follow = [&](double leader_speed, double raw_gap, double min_gap) {
        target = std::min(target, safe_speed(leader_speed, std::max(0.0, raw_gap - min_gap), p));
        hard = std::min(hard, std::max(0.0, raw_gap) / kDt);
    };

    const double to_end = edge.length - v.position;
    if (index > 0) {
        const Vehicle& leader = lane[index - 1];
        follow(leader.speed, leader.position - p.length - v.position, p.min_gap);
    } else if (!last_leg) {
        if (!passable(edge_idx)) {
            follow(0.0, to_end, 0.0);  // stop line: standing virtual leader of length 0
        } else {
            const std::size_t next = route[v.leg + 1];
            const Edge& next_edge = scenario_.network.edges[next];
            const auto& next_lane = lanes_[next];
            if (!next_lane.empty()) {
                const Vehicle& tail = next_lane.back();
                follow(tail.speed, to_end + tail.position - p.length, p.min_gap);
            } else if (v.leg + 2 < route.size() && !passable(next)) {
                follow(0.0, to_end + next_edge.length, 0.0);
            }
            hard = std::min(hard, (to_end + next_edge.length) / kDt);
        }
    }

    const DecelCheck check = required_decel(v.speed, target, kDt, p);
    if (check.emergency && !v.braking_hard) {
        record_emergency_stop(v.counters);
        events.emergency_stops.push_back({v.id, clock_});
    }
    v.braking_hard = check.emergency;

    double speed = std::max({target, v.speed - p.emergency_decel * kDt, 0.0});
    speed = std::max(0.0, std::min(speed, hard));

    record_step(v.counters, speed, edge.speed_limit, kDt);
    if (speed < kHaltingSpeed) v.edge_wait += kDt;
    v.speed = speed;
    v.position += speed * kDt;
    v.stamp = step_count_;

    if (last_leg) {
        if (v.position >= edge.length) {
            v.position = edge.length;
            events.arrivals.push_back(v.id);
            arrived_.push_back(std::move(v));
            lane.pop_front();
        }
        return;
    }
    if (v.position > edge.length) {
        const std::size_t next = route[v.leg + 1];
        Vehicle moved = std::move(v);
        lane.pop_front();
        moved.position = std::min(moved.position - edge.length, scenario_.network.edges[next].length);
        ++moved.leg;
        moved.edge_wait = 0.0;
        lanes_[next].push_back(std::move(moved));
    }
}

void Simulation::insert_due(StepEvents& events) {
    const VehicleParams& p = scenario_.vehicle;
    auto it = pending_.begin();
    while (it != pending_.end() && it->scheduled_depart <= clock_ + 1e-9) {
        const std::size_t entry = routes_[it->route].front();
        auto& lane = lanes_[entry];
        const double free =
            lane.empty() ? scenario_.network.edges[entry].length : lane.back().position - p.length;
        if (free >= p.length + p.min_gap) {
            Vehicle v = std::move(*it);
            it = pending_.erase(it);
            v.position = 0.0;
            v.speed = 0.0;
            v.actual_depart = clock_;
            v.stamp = step_count_;
            events.insertions.push_back({v.id, clock_});
            lane.push_back(std::move(v));
            ++inserted_total_;
        } else {
            ++it;
        }
    }
}

std::vector<VehicleMetrics> Simulation::collect_metrics() const {
    std::vector<VehicleMetrics> out;
    out.reserve(scheduled_total_);
    auto add = [&](const Vehicle& v) {
        out.push_back(finalize(v.id, v.counters, v.scheduled_depart, v.actual_depart, clock_));
    };
    for (const auto& v : arrived_) add(v);
    for (const auto& lane : lanes_)
        for (const auto& v : lane) add(v);
    for (const auto& v : pending_) add(v);
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
    return out;
}

}  // namespace tlrl
