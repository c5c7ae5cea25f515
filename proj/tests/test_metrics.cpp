#include <gtest/gtest.h>

#include <cmath>

#include "tlrl/error.hpp"
#include "tlrl/metrics.hpp"
#include "tlrl/rng.hpp"

using namespace tlrl;

TEST(RecordStep, HaltedVehicle) {
    VehicleCounters c;
    record_step(c, 0.05, 13.9, 1.0);
    EXPECT_DOUBLE_EQ(c.waiting_time, 1.0);
    EXPECT_NEAR(c.time_loss, 1.0, 0.01);
    EXPECT_DOUBLE_EQ(c.time_loss, 1.0 - 0.05 / 13.9);
}

TEST(RecordStep, AtTheLimit) {
    VehicleCounters c;
    record_step(c, 13.9, 13.9, 1.0);
    EXPECT_DOUBLE_EQ(c.waiting_time, 0.0);
    EXPECT_DOUBLE_EQ(c.time_loss, 0.0);
}

TEST(RecordStep, HalfTheLimit) {
    VehicleCounters c;
    record_step(c, 5.0, 10.0, 1.0);
    EXPECT_DOUBLE_EQ(c.time_loss, 0.5);
    EXPECT_DOUBLE_EQ(c.waiting_time, 0.0);
}

TEST(RecordStep, HaltingThresholdIsStrict) {
    VehicleCounters c;
    record_step(c, kHaltingSpeed, 10.0, 1.0);
    EXPECT_DOUBLE_EQ(c.waiting_time, 0.0);
    record_emergency_stop(c);
    EXPECT_EQ(c.emergency_stops, 1);
}

TEST(Finalize, DepartDelay) {
    const VehicleCounters c;
    EXPECT_DOUBLE_EQ(finalize(1, c, 10.0, 10.0, 1000.0).depart_delay, 0.0);
    EXPECT_DOUBLE_EQ(finalize(1, c, 10.0, 14.0, 1000.0).depart_delay, 4.0);
    const auto never = finalize(7, c, 900.0, std::nullopt, 1000.0);
    EXPECT_DOUBLE_EQ(never.depart_delay, 100.0);
    EXPECT_TRUE(never.never_inserted);
    EXPECT_EQ(never.id, 7u);
}

TEST(Aggregate, SmallExamples) {
    const std::vector<double> three = {1, 2, 3};
    const auto s = aggregate(three);
    EXPECT_DOUBLE_EQ(s.mean, 2.0);
    EXPECT_DOUBLE_EQ(s.sd, 1.0);
    EXPECT_DOUBLE_EQ(s.min, 1.0);
    EXPECT_DOUBLE_EQ(s.max, 3.0);
    EXPECT_EQ(s.n, 3u);

    const std::vector<double> one = {74.0688};
    const auto o = aggregate(one);
    EXPECT_DOUBLE_EQ(o.mean, 74.0688);
    EXPECT_DOUBLE_EQ(o.sd, 0.0);
    EXPECT_DOUBLE_EQ(o.min, 74.0688);
    EXPECT_DOUBLE_EQ(o.max, 74.0688);
}

TEST(Aggregate, EmptyIsAnError) { EXPECT_THROW(aggregate(std::vector<double>{}), ContractError); }

namespace {

struct Naive {
    double mean, sd, min, max;
};

// Two-pass textbook formulas.
Naive naive(const std::vector<double>& v) {
    double sum = 0.0, lo = v[0], hi = v[0];
    for (double x : v) {
        sum += x;
        lo = x < lo ? x : lo;
        hi = x > hi ? x : hi;
    }
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, v.size() < 2 ? 0.0 : std::sqrt(ss / static_cast<double>(v.size() - 1)), lo, hi};
}

void expect_rel(double got, double want, double tol) {
    EXPECT_LE(std::abs(got - want), tol * std::max(1.0, std::abs(want))) << got << " vs " << want;
}

}  // namespace

TEST(Aggregate, MatchesNaiveOracle) {
    Rng rng(31337);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1000);
        const double offset = rng.uniform(-1e3, 1e3), scale = rng.uniform(0.01, 500.0);
        for (auto& x : v) x = offset + scale * rng.uniform(-1.0, 1.0);
        const auto s = aggregate(v);
        const auto o = naive(v);
        expect_rel(s.mean, o.mean, 1e-9);
        expect_rel(s.sd, o.sd, 1e-9);
        EXPECT_EQ(s.min, o.min);
        EXPECT_EQ(s.max, o.max);
        EXPECT_LE(s.min, s.mean);
        EXPECT_LE(s.mean, s.max);
    }
}

TEST(PercentChange, Examples) {
    EXPECT_NEAR(percent_change(165.5, 92.4091), 44.1637, 1e-4);
    EXPECT_DOUBLE_EQ(percent_change(12.5, 12.5), 0.0);
    EXPECT_DOUBLE_EQ(percent_change(100.0, 150.0), -50.0);
    EXPECT_THROW(percent_change(0.0, 1.0), ContractError);
}

namespace {

RunReport sample_report(const std::string& controller) {
    std::vector<VehicleRecord> vehicles;
    for (int i = 0; i < 5; ++i) {
        VehicleRecord r;
        r.metrics = {static_cast<std::uint64_t>(i), 10.0 * i, 12.5 * i, i % 2, 0.5 * i, false};
        r.seed = 1001;
        vehicles.push_back(r);
    }
    EpisodeTotals t;
    t.seed = 1001;
    t.vehicles = 5;
    t.arrived = 5;
    for (const Metric m : kMetrics) {
        double sum = 0.0;
        for (const auto& v : vehicles) sum += value_of(v.metrics, m);
        t.totals[static_cast<std::size_t>(m)] = sum;
    }
    return build_report(controller, "single", {1001}, {t}, vehicles);
}

}  // namespace

TEST(Report, SummariesAndJsonRoundTrip) {
    const RunReport r = sample_report("fixed");
    EXPECT_FALSE(r.empty);
    EXPECT_DOUBLE_EQ(r.vehicle_summary[0].mean, 20.0);
    EXPECT_DOUBLE_EQ(r.episode_summary[2].mean, 2.0);
    for (const auto& s : r.vehicle_summary) EXPECT_EQ(s.n, 5u);
    EXPECT_EQ(report_from_json(to_json(r)), r);
}

TEST(Report, CsvLayouts) {
    const RunReport a = sample_report("fixed");
    const RunReport b = sample_report("dqn");
    EXPECT_EQ(report_csv(a).substr(0, report_csv(a).find('\n')), "id,wt,tl,es,dd,seed,episode");
    const RunReport* both[] = {&a, &b};
    const std::string csv = summary_csv(both);
    const std::string header =
        "Statistic,Rule-based W.T.,Rule-based T.L.,Rule-based E.S.,Rule-based D.D.,"
        "DQN W.T.,DQN T.L.,DQN E.S.,DQN D.D.";
    EXPECT_EQ(csv.substr(0, csv.find('\n')), header);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < csv.size()) {
        const auto end = csv.find('\n', start);
        lines.push_back(csv.substr(start, end - start));
        start = end + 1;
    }
    ASSERT_EQ(lines.size(), 5u);
    const char* rows[] = {"Mean", "SD", "Min", "Max"};
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(lines[i + 1].substr(0, lines[i + 1].find(',')), rows[i]);
        EXPECT_EQ(std::count(lines[i + 1].begin(), lines[i + 1].end(), ','), 8);
    }
    EXPECT_EQ(lines[1], "Mean,20.0000,25.0000,0.4000,1.0000,20.0000,25.0000,0.4000,1.0000");
}
