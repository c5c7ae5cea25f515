#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlrl/controllers.hpp"
#include "tlrl/dqn.hpp"
#include "tlrl/metrics.hpp"
#include "tlrl/netmodel.hpp"
#include "tlrl/qnet.hpp"

namespace tlrl {

/// Trained networks, one per signalized junction, and the decision cadence
/// they were trained with.
struct Weights {
    std::vector<std::string> junctions;
    std::vector<QNetwork> nets;
    int decision_interval = 5;

    bool operator==(const Weights&) const = default;
};

/// A single-junction bundle is written as a plain network document with an
/// extra `decision_interval` key; larger bundles nest one network per
/// junction under `agents`.
std::string serialize(const Weights& weights);
Weights parse_weights(std::string_view text);

struct CurveRow {
    int episode = 0;
    double episode_return = 0.0;  ///< sum of decision rewards over all agents
    double epsilon = 0.0;         ///< exploration rate at the end of the episode
    double mean_loss = 0.0;       ///< 0 when no gradient step happened
    std::uint64_t updates = 0;

    bool operator==(const CurveRow&) const = default;
};

struct TrainOptions {
    int episodes = 200;
    std::uint64_t seed = 7;
    RewardMode reward_mode = RewardMode::Balanced;
    DqnHyper hp;
};

struct TrainResult {
    Weights weights;
    std::vector<CurveRow> curve;
};

/// Simulation seed of training episode `episode` under `master`.
std::uint64_t episode_seed(std::uint64_t master, int episode);

/// Networks the agents start from (Xavier init from the master seed).
Weights initial_weights(const Scenario& scenario, const TrainOptions& options);

/// Runs the training loop: per decision, featurize -> epsilon-greedy action
/// -> interlock -> simulate one decision interval -> reward -> store ->
/// learn. One independent agent per signalized junction.
TrainResult train(const Scenario& scenario, const TrainOptions& options);

/// episode,return,epsilon,mean_loss,updates
std::string curve_csv(const std::vector<CurveRow>& curve);

struct EpisodeResult {
    std::vector<VehicleMetrics> vehicles;
    EpisodeTotals totals;
    std::size_t signal_violations = 0;
};

/// Full-duration simulation of `scenario` under `controller`, with every
/// junction's signal stream checked by a SignalMonitor.
EpisodeResult run_episode(const Scenario& scenario, std::uint64_t seed, Controller& controller, int episode = 0);

enum class ControllerKind { Fixed, Dqn };

/// One full simulation per seed, results merged in seed-list order.
/// `weights` is required for the dqn controller and ignored otherwise.
RunReport evaluate(const Scenario& scenario, ControllerKind kind, const Weights* weights,
                   const std::vector<std::uint64_t>& seeds);

/// Side-by-side comparison of two reports on the same scenario and seeds.
/// `change_pct` is 100 * (candidate - baseline) / baseline, so a reduction
/// is negative. Throws ContractError on mismatched scenario or seeds.
nlohmann::json compare(const RunReport& baseline, const RunReport& candidate);

// --- file-level entry points used by the CLI

struct TrainConfig {
    std::string scenario_path;
    int episodes = 200;
    std::uint64_t seed = 7;
    RewardMode reward_mode = RewardMode::Balanced;
    std::string weights_out;
    std::string curve_out;  ///< defaults to curve.csv next to the weights
    std::vector<std::pair<std::string, std::string>> hp_overrides;
};

struct EvalConfig {
    std::string scenario_path;
    ControllerKind controller = ControllerKind::Fixed;
    std::string weights_path;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
};

TrainResult run_train(const TrainConfig& config);
RunReport run_eval(const EvalConfig& config);
/// `a` and `b` are eval output directories or report.json files.
nlohmann::json run_compare(const std::string& a, const std::string& b, const std::string& out_dir);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace tlrl
