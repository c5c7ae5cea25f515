#include "tlrl/controllers.hpp"

#include <cmath>

namespace tlrl {

namespace {

JunctionSignal changed(Color a, Color b) { return {a, b, 0}; }

}  // namespace

JunctionSignal apply_interlock(Request request, const JunctionSignal& cur, const Junction& j) {
    const bool a_green = cur.a == Color::Green;
    const bool b_green = cur.b == Color::Green;

    if (cur.a == Color::Yellow || cur.b == Color::Yellow) {
        if (cur.elapsed < j.yellow) return cur;
        // Yellow is over: the yellow axis turns red; serve the request if it
        // is the other axis, otherwise hold all red.
        const bool a_was_yellow = cur.a == Color::Yellow;
        if (a_was_yellow && request == Request::ServeB) return changed(Color::Red, Color::Green);
        if (!a_was_yellow && request == Request::ServeA) return changed(Color::Green, Color::Red);
        return changed(Color::Red, Color::Red);
    }

    if (a_green || b_green) {
        const bool keep = (a_green && request == Request::ServeA) || (b_green && request == Request::ServeB);
        if (keep || cur.elapsed < j.min_green) return cur;
        return a_green ? changed(Color::Yellow, Color::Red) : changed(Color::Red, Color::Yellow);
    }

    // All red.
    switch (request) {
        case Request::ServeA: return changed(Color::Green, Color::Red);
        case Request::ServeB: return changed(Color::Red, Color::Green);
        case Request::AllRed: return cur;
    }
    return cur;
}

FixedTimePlan plan_for(const Junction& j) {
    if (j.fixed_plan) return *j.fixed_plan;
    FixedTimePlan p;
    p.yellow = j.yellow;
    return p;
}

JunctionSignal fixed_time_decide(double clock, const FixedTimePlan& plan) {
    const int cycle = plan.cycle();
    int t = static_cast<int>(std::floor(clock)) % cycle;
    if (t < 0) t += cycle;
    if (t < plan.green_a) return {Color::Green, Color::Red, t};
    t -= plan.green_a;
    if (t < plan.yellow) return {Color::Yellow, Color::Red, t};
    t -= plan.yellow;
    if (t < plan.green_b) return {Color::Red, Color::Green, t};
    t -= plan.green_b;
    return {Color::Red, Color::Yellow, t};
}

void SignalMonitor::check_axis(Run& run, Color now, const char* axis, std::vector<std::string>& out) {
    const std::string tag = "junction '" + junction_->id + "' axis-" + axis;
    if (now == run.color) {
        ++run.length;
        return;
    }
    if (run.color == Color::Green && now == Color::Red)
        out.push_back(tag + ": green to red without yellow");
    if (run.color == Color::Yellow && now == Color::Green)
        out.push_back(tag + ": yellow back to green");
    if (run.color == Color::Red && now == Color::Yellow)
        out.push_back(tag + ": red to yellow");
    if (run.complete) {
        if (run.color == Color::Yellow && run.length != junction_->yellow)
            out.push_back(tag + ": yellow lasted " + std::to_string(run.length) + " steps, expected " +
                          std::to_string(junction_->yellow));
        if (run.color == Color::Green && run.length < junction_->min_green)
            out.push_back(tag + ": green lasted " + std::to_string(run.length) + " steps, min-green is " +
                          std::to_string(junction_->min_green));
    }
    run = {now, 1, true};
}

std::vector<std::string> SignalMonitor::observe(const JunctionSignal& shown) {
    std::vector<std::string> out;
    if (!interlock_ok(shown)) out.push_back("junction '" + junction_->id + "': both axes open");
    if (!started_) {
        started_ = true;
        runs_[0] = {shown.a, 1, false};
        runs_[1] = {shown.b, 1, false};
    } else {
        check_axis(runs_[0], shown.a, "A", out);
        check_axis(runs_[1], shown.b, "B", out);
    }
    violations_ += out.size();
    return out;
}

FixedTimeController::FixedTimeController(const Network& network) {
    for (const std::size_t j : network.signalized_junctions()) plans_.push_back(plan_for(network.junctions[j]));
}

SignalAssignment FixedTimeController::decide(const Simulation& sim) {
    SignalAssignment out;
    out.reserve(plans_.size());
    for (const auto& plan : plans_) out.push_back(fixed_time_decide(sim.clock(), plan));
    return out;
}

}  // namespace tlrl
