#include "tlrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tlrl/error.hpp"

namespace tlrl {

using nlohmann::json;

void record_step(VehicleCounters& c, double speed, double allowed_speed, double dt) {
    if (speed < kHaltingSpeed) c.waiting_time += dt;
    if (allowed_speed > 0.0) c.time_loss += std::max(0.0, 1.0 - speed / allowed_speed) * dt;
}

VehicleMetrics finalize(std::uint64_t id, const VehicleCounters& c, double scheduled_depart,
                        std::optional<double> actual_depart, double end_time) {
    VehicleMetrics m;
    m.id = id;
    m.waiting_time = c.waiting_time;
    m.time_loss = c.time_loss;
    m.emergency_stops = c.emergency_stops;
    if (actual_depart) {
        m.depart_delay = std::max(0.0, *actual_depart - scheduled_depart);
    } else {
        m.depart_delay = std::max(0.0, end_time - scheduled_depart);
        m.never_inserted = true;
    }
    return m;
}

const char* label(Metric m) noexcept {
    switch (m) {
        case Metric::WaitingTime: return "W.T.";
        case Metric::TimeLoss: return "T.L.";
        case Metric::EmergencyStops: return "E.S.";
        case Metric::DepartDelay: return "D.D.";
    }
    return "?";
}

double value_of(const VehicleMetrics& v, Metric m) noexcept {
    switch (m) {
        case Metric::WaitingTime: return v.waiting_time;
        case Metric::TimeLoss: return v.time_loss;
        case Metric::EmergencyStops: return static_cast<double>(v.emergency_stops);
        case Metric::DepartDelay: return v.depart_delay;
    }
    return 0.0;
}

StatSummary aggregate(std::span<const double> values) {
    if (values.empty()) throw ContractError("aggregate of an empty list");
    // Welford's single-pass update.
    StatSummary s;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (const double x : values) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.n = n;
    // Rounding can push the mean a hair outside [min, max] for constant input.
    s.mean = std::clamp(mean, s.min, s.max);
    s.sd = n < 2 ? 0.0 : std::sqrt(std::max(0.0, m2) / static_cast<double>(n - 1));
    return s;
}

double percent_change(double before, double after) {
    if (before == 0.0) throw ContractError("percent_change with before = 0");
    return 100.0 * (before - after) / before;
}

RunReport build_report(std::string controller, std::string scenario_id, std::vector<std::uint64_t> seeds,
                       std::vector<EpisodeTotals> episodes, std::vector<VehicleRecord> vehicles) {
    RunReport r;
    r.controller = std::move(controller);
    r.scenario_id = std::move(scenario_id);
    r.seeds = std::move(seeds);
    r.episodes = std::move(episodes);
    r.vehicles = std::move(vehicles);
    r.empty = r.vehicles.empty();

    for (const Metric m : kMetrics) {
        const auto k = static_cast<std::size_t>(m);
        if (!r.vehicles.empty()) {
            std::vector<double> values;
            values.reserve(r.vehicles.size());
            for (const auto& v : r.vehicles) values.push_back(value_of(v.metrics, m));
            r.vehicle_summary[k] = aggregate(values);
        }
        if (!r.episodes.empty()) {
            std::vector<double> totals;
            for (const auto& e : r.episodes) totals.push_back(e.totals[k]);
            r.episode_summary[k] = aggregate(totals);
        }
    }
    return r;
}

std::string display_name(const std::string& controller) {
    if (controller == "fixed") return "Rule-based";
    if (controller == "dqn") return "DQN";
    return controller;
}

namespace {

json summary_json(const StatSummary& s) {
    return {{"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}, {"n", s.n}};
}

StatSummary summary_from(const json& j) {
    StatSummary s;
    s.mean = j.at("mean").get<double>();
    s.sd = j.at("sd").get<double>();
    s.min = j.at("min").get<double>();
    s.max = j.at("max").get<double>();
    s.n = j.at("n").get<std::size_t>();
    return s;
}

// Shortest representation that round-trips; keeps CSVs byte-stable.
std::string num(double v) {
    json j = v;
    return j.dump();
}

}  // namespace

json to_json(const RunReport& r) {
    json vs = json::object();
    json es = json::object();
    for (const Metric m : kMetrics) {
        const auto k = static_cast<std::size_t>(m);
        vs[label(m)] = summary_json(r.vehicle_summary[k]);
        es[label(m)] = summary_json(r.episode_summary[k]);
    }
    json episodes = json::array();
    for (const auto& e : r.episodes)
        episodes.push_back({{"seed", e.seed},
                            {"episode", e.episode},
                            {"vehicles", e.vehicles},
                            {"arrived", e.arrived},
                            {"never_inserted", e.never_inserted},
                            {"totals", e.totals}});
    json vehicles = json::array();
    for (const auto& v : r.vehicles)
        vehicles.push_back({v.metrics.id, v.metrics.waiting_time, v.metrics.time_loss, v.metrics.emergency_stops,
                            v.metrics.depart_delay, v.metrics.never_inserted, v.seed, v.episode});
    return {{"format_version", 1},
            {"controller", r.controller},
            {"scenario", r.scenario_id},
            {"seeds", r.seeds},
            {"empty", r.empty},
            {"vehicle_summary", vs},
            {"episode_summary", es},
            {"episodes", episodes},
            {"vehicle_columns", {"id", "wt", "tl", "es", "dd", "never_inserted", "seed", "episode"}},
            {"vehicles", vehicles}};
}

RunReport report_from_json(const json& doc) {
    try {
        RunReport r;
        r.controller = doc.at("controller").get<std::string>();
        r.scenario_id = doc.at("scenario").get<std::string>();
        r.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        r.empty = doc.at("empty").get<bool>();
        for (const Metric m : kMetrics) {
            const auto k = static_cast<std::size_t>(m);
            r.vehicle_summary[k] = summary_from(doc.at("vehicle_summary").at(label(m)));
            r.episode_summary[k] = summary_from(doc.at("episode_summary").at(label(m)));
        }
        for (const auto& e : doc.at("episodes")) {
            EpisodeTotals t;
            t.seed = e.at("seed").get<std::uint64_t>();
            t.episode = e.at("episode").get<int>();
            t.vehicles = e.at("vehicles").get<std::size_t>();
            t.arrived = e.at("arrived").get<std::size_t>();
            t.never_inserted = e.at("never_inserted").get<std::size_t>();
            t.totals = e.at("totals").get<std::array<double, 4>>();
            r.episodes.push_back(t);
        }
        for (const auto& row : doc.at("vehicles")) {
            VehicleRecord v;
            v.metrics.id = row.at(0).get<std::uint64_t>();
            v.metrics.waiting_time = row.at(1).get<double>();
            v.metrics.time_loss = row.at(2).get<double>();
            v.metrics.emergency_stops = row.at(3).get<int>();
            v.metrics.depart_delay = row.at(4).get<double>();
            v.metrics.never_inserted = row.at(5).get<bool>();
            v.seed = row.at(6).get<std::uint64_t>();
            v.episode = row.at(7).get<int>();
            r.vehicles.push_back(v);
        }
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report document: ") + e.what());
    }
}

std::string report_csv(const RunReport& r) {
    std::ostringstream os;
    os << "id,wt,tl,es,dd,seed,episode\n";
    for (const auto& v : r.vehicles)
        os << v.metrics.id << ',' << num(v.metrics.waiting_time) << ',' << num(v.metrics.time_loss) << ','
           << v.metrics.emergency_stops << ',' << num(v.metrics.depart_delay) << ',' << v.seed << ','
           << v.episode << '\n';
    return os.str();
}

std::string episodes_csv(const RunReport& r) {
    std::ostringstream os;
    os << "episode,seed,vehicles,arrived,never_inserted,wt_total,tl_total,es_total,dd_total\n";
    for (const auto& e : r.episodes) {
        os << e.episode << ',' << e.seed << ',' << e.vehicles << ',' << e.arrived << ',' << e.never_inserted;
        for (const double t : e.totals) os << ',' << num(t);
        os << '\n';
    }
    return os.str();
}

std::string summary_csv(std::span<const RunReport* const> reports) {
    std::ostringstream os;
    os << "Statistic";
    for (const RunReport* r : reports)
        for (const Metric m : kMetrics) os << ',' << display_name(r->controller) << ' ' << label(m);
    os << '\n';
    static constexpr std::array<const char*, 4> kRows = {"Mean", "SD", "Min", "Max"};
    for (std::size_t row = 0; row < kRows.size(); ++row) {
        os << kRows[row];
        for (const RunReport* r : reports)
            for (const Metric m : kMetrics) {
                const StatSummary& s = r->vehicle_summary[static_cast<std::size_t>(m)];
                const double v = row == 0 ? s.mean : row == 1 ? s.sd : row == 2 ? s.min : s.max;
                os << ',' << std::fixed << std::setprecision(4) << v << std::defaultfloat;
            }
        os << '\n';
    }
    return os.str();
}

}  // namespace tlrl
