// Command-line front end: train, eval, compare.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tlrl/error.hpp"
#include "tlrl/harness.hpp"

namespace {

void fail_line(const char* kind, const std::string& message) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Traffic-signal control with a DQN agent on a microscopic simulator"};
    app.require_subcommand(1);

    tlrl::TrainConfig train_cfg;
    std::string reward_mode = "balanced";
    std::vector<std::string> hp;
    auto* train = app.add_subcommand("train", "train a DQN agent and export its weights");
    train->add_option("--scenario", train_cfg.scenario_path, "scenario file")->required();
    train->add_option("--episodes", train_cfg.episodes, "training episodes")->check(CLI::PositiveNumber);
    train->add_option("--seed", train_cfg.seed, "master seed");
    train->add_option("--reward-mode", reward_mode, "literal | balanced")
        ->check(CLI::IsMember({"literal", "balanced"}));
    train->add_option("--weights-out", train_cfg.weights_out, "weights document to write")->required();
    train->add_option("--curve-out", train_cfg.curve_out, "learning curve CSV (default: curve.csv beside weights)");
    train->add_option("--hp", hp, "hyperparameter override key=val (repeatable)");

    tlrl::EvalConfig eval_cfg;
    std::string controller = "fixed";
    auto* eval = app.add_subcommand("eval", "evaluate a controller over a list of seeds");
    eval->add_option("--scenario", eval_cfg.scenario_path, "scenario file")->required();
    eval->add_option("--controller", controller, "fixed | dqn")->check(CLI::IsMember({"fixed", "dqn"}));
    eval->add_option("--weights", eval_cfg.weights_path, "weights document (dqn controller)");
    eval->add_option("--seeds", eval_cfg.seeds, "comma-separated evaluation seeds")->delimiter(',')->required();
    eval->add_option("--out", eval_cfg.out_dir, "output directory")->required();

    std::string cmp_a, cmp_b, cmp_out;
    auto* cmp = app.add_subcommand("compare", "compare two evaluation reports (baseline first)");
    cmp->add_option("A", cmp_a, "baseline report directory or report.json")->required();
    cmp->add_option("B", cmp_b, "candidate report directory or report.json")->required();
    cmp->add_option("--out", cmp_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail_line("usage", e.what());
        return 2;
    }

    try {
        if (*train) {
            train_cfg.reward_mode = tlrl::parse_reward_mode(reward_mode);
            for (const auto& kv : hp) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw tlrl::ContractError("--hp expects key=val, got '" + kv + "'");
                train_cfg.hp_overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
            }
            const auto result = tlrl::run_train(train_cfg);
            const auto& last = result.curve.back();
            std::cout << "trained " << result.curve.size() << " episodes; final return " << last.episode_return
                      << ", epsilon " << last.epsilon << "\n";
        } else if (*eval) {
            eval_cfg.controller = controller == "dqn" ? tlrl::ControllerKind::Dqn : tlrl::ControllerKind::Fixed;
            const auto report = tlrl::run_eval(eval_cfg);
            const tlrl::RunReport* one[] = {&report};
            std::cout << tlrl::summary_csv(one);
        } else if (*cmp) {
            std::cout << tlrl::run_compare(cmp_a, cmp_b, cmp_out).dump(2) << "\n";
        }
    } catch (const tlrl::ValidationError& e) {
        fail_line(e.kind(), e.what());
        return 1;
    } catch (const tlrl::Error& e) {
        fail_line(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        fail_line("internal", e.what());
        return 1;
    }
    return 0;
}
