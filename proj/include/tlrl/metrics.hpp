#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tlrl {

/// Speed below which a vehicle counts as halted, m/s.
inline constexpr double kHaltingSpeed = 0.1;

/// Running per-vehicle counters, updated once per simulation step.
struct VehicleCounters {
    double waiting_time = 0.0;
    double time_loss = 0.0;
    int emergency_stops = 0;
};

/// Accounts one step of duration `dt` at `speed` on a road whose limit is `allowed_speed`.
void record_step(VehicleCounters& counters, double speed, double allowed_speed, double dt);

/// Counts one emergency-stop onset.
inline void record_emergency_stop(VehicleCounters& counters) { ++counters.emergency_stops; }

struct VehicleMetrics {
    std::uint64_t id = 0;
    double waiting_time = 0.0;
    double time_loss = 0.0;
    int emergency_stops = 0;
    double depart_delay = 0.0;
    bool never_inserted = false;

    bool operator==(const VehicleMetrics&) const = default;
};

/// Final metrics of one vehicle. A vehicle that was never inserted gets
/// depart delay `end_time - scheduled_depart` and is flagged.
VehicleMetrics finalize(std::uint64_t id, const VehicleCounters& counters, double scheduled_depart,
                        std::optional<double> actual_depart, double end_time);

enum class Metric { WaitingTime = 0, TimeLoss = 1, EmergencyStops = 2, DepartDelay = 3 };
inline constexpr std::array<Metric, 4> kMetrics = {Metric::WaitingTime, Metric::TimeLoss,
                                                   Metric::EmergencyStops, Metric::DepartDelay};
/// Column label: "W.T.", "T.L.", "E.S.", "D.D."
const char* label(Metric m) noexcept;
double value_of(const VehicleMetrics& v, Metric m) noexcept;

struct StatSummary {
    double mean = 0.0;
    double sd = 0.0;  ///< sample standard deviation, 0 when n < 2
    double min = 0.0;
    double max = 0.0;
    std::size_t n = 0;

    bool operator==(const StatSummary&) const = default;
};

/// Mean, sample SD, min and max. Throws ContractError on an empty input.
StatSummary aggregate(std::span<const double> values);

/// 100 * (before - after) / before. Throws ContractError if before == 0.
double percent_change(double before, double after);

/// Totals for one simulated episode.
struct EpisodeTotals {
    std::uint64_t seed = 0;
    int episode = 0;
    std::size_t vehicles = 0;
    std::size_t arrived = 0;
    std::size_t never_inserted = 0;
    std::array<double, 4> totals{};  ///< sum of each metric over the episode's vehicles

    bool operator==(const EpisodeTotals&) const = default;
};

struct VehicleRecord {
    VehicleMetrics metrics;
    std::uint64_t seed = 0;
    int episode = 0;

    bool operator==(const VehicleRecord&) const = default;
};

struct RunReport {
    std::string controller;  ///< "fixed" or "dqn"
    std::string scenario_id;
    std::vector<std::uint64_t> seeds;
    /// Per-vehicle summaries pooled over all episodes, indexed by Metric.
    std::array<StatSummary, 4> vehicle_summary{};
    /// Summaries of the per-episode totals, indexed by Metric.
    std::array<StatSummary, 4> episode_summary{};
    bool empty = false;  ///< no vehicle was ever scheduled
    std::vector<EpisodeTotals> episodes;
    std::vector<VehicleRecord> vehicles;

    bool operator==(const RunReport&) const = default;
};

/// Builds the summaries from per-vehicle records and episode totals.
RunReport build_report(std::string controller, std::string scenario_id, std::vector<std::uint64_t> seeds,
                       std::vector<EpisodeTotals> episodes, std::vector<VehicleRecord> vehicles);

/// Table heading for a controller: "Rule-based" for fixed, "DQN" for dqn.
std::string display_name(const std::string& controller);

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

/// id,wt,tl,es,dd,seed,episode
std::string report_csv(const RunReport& report);
/// One row per episode with the four totals.
std::string episodes_csv(const RunReport& report);
/// Rows Mean/SD/Min/Max; one column per (controller, metric), controllers in argument order.
std::string summary_csv(std::span<const RunReport* const> reports);

}  // namespace tlrl
