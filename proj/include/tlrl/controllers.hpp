#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tlrl/netmodel.hpp"
#include "tlrl/signals.hpp"
#include "tlrl/simcore.hpp"

namespace tlrl {

/// What a controller asks of one junction. Yellow is never requested
/// directly; the interlock inserts it.
enum class Request { ServeA, ServeB, AllRed };

/// Legalizes `request` against the current signal state of `junction`.
///
/// - Same axis as currently served: no change.
/// - Switching away from a green axis waits for min-green, then shows
///   yellow for exactly `yellow` steps, then red.
/// - At the end of yellow the requested axis turns green directly (or all
///   red when that is what is requested).
/// - From all red, a serve request turns its axis green at once.
///
/// The result always satisfies interlock_ok. `elapsed` is reset to 0 when
/// the colors change and carried over otherwise.
JunctionSignal apply_interlock(Request request, const JunctionSignal& current, const Junction& junction);

/// Baseline plan of a junction: its `fixed_plan`, or 30/yellow/30.
FixedTimePlan plan_for(const Junction& junction);

/// Fixed-time colors at time `clock`: A green, A yellow, B green, B yellow,
/// with the other axis red throughout. `elapsed` is the time since the
/// current interval began.
JunctionSignal fixed_time_decide(double clock, const FixedTimePlan& plan);

/// Watches the per-step signal stream of one junction and reports every
/// safety or timing rule it breaks.
class SignalMonitor {
public:
    explicit SignalMonitor(const Junction& junction) : junction_(&junction) {}

    /// Feeds the colors shown during one step. Returns the violations found
    /// at this step (empty when legal).
    std::vector<std::string> observe(const JunctionSignal& shown);

    std::size_t violation_count() const noexcept { return violations_; }

private:
    struct Run {
        Color color = Color::Red;
        int length = 0;
        bool complete = false;  // run started inside the observed window
    };

    void check_axis(Run& run, Color now, const char* axis, std::vector<std::string>& out);

    const Junction* junction_;
    bool started_ = false;
    Run runs_[2];
    std::size_t violations_ = 0;
};

/// A traffic-light controller drives every signalized junction of a
/// simulation, one decision per simulated step.
class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string name() const = 0;
    /// Signals to show during the next step of `sim`.
    virtual SignalAssignment decide(const Simulation& sim) = 0;
};

class FixedTimeController final : public Controller {
public:
    explicit FixedTimeController(const Network& network);

    std::string name() const override { return "fixed"; }
    SignalAssignment decide(const Simulation& sim) override;

private:
    std::vector<FixedTimePlan> plans_;
};

}  // namespace tlrl
