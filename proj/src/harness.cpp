#include "tlrl/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tlrl/error.hpp"
#include "tlrl/simcore.hpp"

namespace tlrl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("failed writing '" + path + "'");
}

// --- weights bundle

std::string serialize(const Weights& w) {
    if (w.nets.size() != w.junctions.size()) throw ContractError("weights: one junction id per network required");
    json doc;
    if (w.nets.size() == 1) {
        doc = to_json(w.nets.front());
        doc["junction"] = w.junctions.front();
    } else {
        json agents = json::array();
        for (std::size_t i = 0; i < w.nets.size(); ++i) {
            json a = to_json(w.nets[i]);
            a["junction"] = w.junctions[i];
            agents.push_back(std::move(a));
        }
        doc = {{"format_version", kWeightsFormatVersion}, {"agents", agents}};
    }
    doc["decision_interval"] = w.decision_interval;
    return doc.dump() + "\n";
}

Weights parse_weights(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed weights document: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("malformed weights document: expected an object");
    Weights w;
    auto junction_of = [](const json& j) {
        const auto it = j.find("junction");
        return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
    };
    if (const auto it = doc.find("agents"); it != doc.end()) {
        if (!it->is_array()) throw ParseError("weights document: 'agents' must be an array");
        for (const auto& a : *it) {
            w.nets.push_back(network_from_json(a));
            w.junctions.push_back(junction_of(a));
        }
    } else {
        w.nets.push_back(network_from_json(doc));
        w.junctions.push_back(junction_of(doc));
    }
    if (const auto it = doc.find("decision_interval"); it != doc.end()) {
        if (!it->is_number_integer() || it->get<int>() < 1)
            throw ParseError("weights document: decision_interval must be a positive integer");
        w.decision_interval = it->get<int>();
    }
    return w;
}

// --- training

std::uint64_t episode_seed(std::uint64_t master, int episode) {
    return derive_seed(master, streams::kEpisode, static_cast<std::uint64_t>(episode));
}

namespace {

std::uint64_t agent_seed(std::uint64_t master, std::size_t slot) {
    return derive_seed(master, streams::kAgent, slot);
}

}  // namespace

Weights initial_weights(const Scenario& scenario, const TrainOptions& opt) {
    const Network& net = scenario.network;
    Weights w;
    w.decision_interval = opt.hp.decision_interval;
    const auto slots = net.signalized_junctions();
    for (std::size_t s = 0; s < slots.size(); ++s) {
        const Junction& j = net.junctions[slots[s]];
        w.junctions.push_back(j.id);
        w.nets.push_back(DqnAgent(state_dim(net, j), opt.hp, agent_seed(opt.seed, s)).online());
    }
    return w;
}

TrainResult train(const Scenario& scenario, const TrainOptions& opt) {
    if (opt.episodes < 1) throw ContractError("episodes must be >= 1");
    const Network& net = scenario.network;
    const auto slots = net.signalized_junctions();
    if (slots.empty()) throw ContractError("scenario has no signalized junction to control");

    const DqnHyper& hp = opt.hp;
    std::vector<DqnAgent> agents;
    std::vector<const Junction*> junctions;
    for (std::size_t s = 0; s < slots.size(); ++s) {
        junctions.push_back(&net.junctions[slots[s]]);
        agents.emplace_back(state_dim(net, *junctions.back()), hp, agent_seed(opt.seed, s));
    }

    const auto steps_per_episode = static_cast<std::uint64_t>(std::ceil(scenario.duration / Simulation::kDt));
    const std::uint64_t decisions_per_episode =
        (steps_per_episode + static_cast<std::uint64_t>(hp.decision_interval) - 1) /
        static_cast<std::uint64_t>(hp.decision_interval);
    const std::uint64_t total_decisions = decisions_per_episode * static_cast<std::uint64_t>(opt.episodes);

    TrainResult result;
    std::uint64_t decision = 0;
    for (int ep = 0; ep < opt.episodes; ++ep) {
        Simulation sim(scenario, episode_seed(opt.seed, ep));
        CurveRow row;
        row.episode = ep;
        double loss_sum = 0.0;

        std::vector<std::vector<double>> states;
        for (std::size_t s = 0; s < slots.size(); ++s) states.push_back(featurize(sim, s));

        while (!sim.finished()) {
            const double eps = epsilon_at(hp, decision, total_decisions);
            row.epsilon = eps;
            std::vector<std::size_t> actions;
            std::vector<Request> requests;
            for (std::size_t s = 0; s < slots.size(); ++s) {
                actions.push_back(agents[s].act(states[s], eps));
                requests.push_back(action_to_request(actions.back()));
            }

            std::vector<double> rewards(slots.size(), 0.0);
            int steps = 0;
            for (int k = 0; k < hp.decision_interval && !sim.finished(); ++k) {
                SignalAssignment next;
                for (std::size_t s = 0; s < slots.size(); ++s)
                    next.push_back(apply_interlock(requests[s], sim.signals()[s], *junctions[s]));
                sim.step(next);
                for (std::size_t s = 0; s < slots.size(); ++s)
                    rewards[s] += reward(observe(sim, s), opt.reward_mode);
                ++steps;
            }

            const bool terminal = sim.finished();
            for (std::size_t s = 0; s < slots.size(); ++s) {
                const double r = rewards[s] / static_cast<double>(steps);
                auto next_state = featurize(sim, s);
                agents[s].remember({states[s], actions[s], r, next_state, terminal});
                states[s] = std::move(next_state);
                row.episode_return += r;
                if (const auto loss = agents[s].learn()) {
                    if (!std::isfinite(*loss))
                        throw Error("non-finite loss in episode " + std::to_string(ep));
                    loss_sum += *loss;
                    ++row.updates;
                }
            }
            ++decision;
        }
        row.mean_loss = row.updates ? loss_sum / static_cast<double>(row.updates) : 0.0;
        result.curve.push_back(row);
    }

    result.weights.decision_interval = hp.decision_interval;
    for (std::size_t s = 0; s < slots.size(); ++s) {
        result.weights.junctions.push_back(junctions[s]->id);
        result.weights.nets.push_back(agents[s].online());
    }
    return result;
}

std::string curve_csv(const std::vector<CurveRow>& curve) {
    std::ostringstream os;
    os << "episode,return,epsilon,mean_loss,updates\n";
    auto num = [](double v) { return json(v).dump(); };
    for (const auto& r : curve)
        os << r.episode << ',' << num(r.episode_return) << ',' << num(r.epsilon) << ',' << num(r.mean_loss) << ','
           << r.updates << '\n';
    return os.str();
}

// --- evaluation

EpisodeResult run_episode(const Scenario& scenario, std::uint64_t seed, Controller& controller, int episode) {
    Simulation sim(scenario, seed);
    std::vector<SignalMonitor> monitors;
    for (const std::size_t j : sim.signalized()) monitors.emplace_back(scenario.network.junctions[j]);

    EpisodeResult out;
    while (!sim.finished()) {
        const SignalAssignment next = controller.decide(sim);
        for (std::size_t s = 0; s < monitors.size() && s < next.size(); ++s)
            out.signal_violations += monitors[s].observe(next[s]).size();
        sim.step(next);
    }

    out.vehicles = sim.collect_metrics();
    EpisodeTotals& t = out.totals;
    t.seed = seed;
    t.episode = episode;
    t.vehicles = out.vehicles.size();
    t.arrived = sim.arrived_total();
    for (const auto& v : out.vehicles) {
        if (v.never_inserted) ++t.never_inserted;
        for (const Metric m : kMetrics) t.totals[static_cast<std::size_t>(m)] += value_of(v, m);
    }
    return out;
}

RunReport evaluate(const Scenario& scenario, ControllerKind kind, const Weights* weights,
                   const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ContractError("evaluation needs at least one seed");
    if (kind == ControllerKind::Dqn && !weights) throw ContractError("dqn evaluation needs weights");

    std::vector<EpisodeTotals> episodes;
    std::vector<VehicleRecord> vehicles;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        std::unique_ptr<Controller> controller;
        if (kind == ControllerKind::Fixed)
            controller = std::make_unique<FixedTimeController>(scenario.network);
        else
            controller = std::make_unique<DqnController>(scenario.network, weights->nets, weights->decision_interval);

        const int episode = static_cast<int>(i);
        EpisodeResult r = run_episode(scenario, seeds[i], *controller, episode);
        if (r.signal_violations)
            throw Error("controller produced " + std::to_string(r.signal_violations) + " signal violations");
        episodes.push_back(r.totals);
        for (const auto& v : r.vehicles) vehicles.push_back({v, seeds[i], episode});
    }
    return build_report(kind == ControllerKind::Fixed ? "fixed" : "dqn", scenario.id, seeds, std::move(episodes),
                        std::move(vehicles));
}

json compare(const RunReport& a, const RunReport& b) {
    if (a.scenario_id != b.scenario_id)
        throw ContractError("reports are for different scenarios ('" + a.scenario_id + "' vs '" + b.scenario_id + "')");
    if (a.seeds != b.seeds) throw ContractError("reports use different seed lists");

    auto entry = [](double before, double after) {
        json e = {{"baseline", before}, {"candidate", after}};
        if (before == 0.0) {
            e["change_pct"] = before == after ? json(0.0) : json(nullptr);
        } else {
            e["change_pct"] = 0.0 - percent_change(before, after);
        }
        return e;
    };
    json per_vehicle = json::object();
    json per_episode = json::object();
    for (const Metric m : kMetrics) {
        const auto k = static_cast<std::size_t>(m);
        per_vehicle[label(m)] = entry(a.vehicle_summary[k].mean, b.vehicle_summary[k].mean);
        per_episode[label(m)] = entry(a.episode_summary[k].mean, b.episode_summary[k].mean);
    }
    return {{"scenario", a.scenario_id},
            {"seeds", a.seeds},
            {"baseline", display_name(a.controller)},
            {"candidate", display_name(b.controller)},
            {"vehicle_mean", per_vehicle},
            {"episode_total_mean", per_episode}};
}

// --- file-level entry points

TrainResult run_train(const TrainConfig& c) {
    if (c.scenario_path.empty() || c.weights_out.empty()) throw ContractError("scenario and weights paths are required");
    const Scenario scenario = load_scenario_file(c.scenario_path);
    TrainOptions opt;
    opt.episodes = c.episodes;
    opt.seed = c.seed;
    opt.reward_mode = c.reward_mode;
    opt.hp.merge(scenario.train);
    for (const auto& [k, v] : c.hp_overrides) opt.hp.set(k, v);

    TrainResult result = train(scenario, opt);
    write_file(c.weights_out, serialize(result.weights));
    const std::string curve =
        c.curve_out.empty() ? (fs::path(c.weights_out).parent_path() / "curve.csv").string() : c.curve_out;
    write_file(curve, curve_csv(result.curve));
    return result;
}

RunReport run_eval(const EvalConfig& c) {
    if (c.scenario_path.empty() || c.out_dir.empty()) throw ContractError("scenario and output paths are required");
    const Scenario scenario = load_scenario_file(c.scenario_path);
    std::optional<Weights> weights;
    if (c.controller == ControllerKind::Dqn) {
        if (c.weights_path.empty()) throw ContractError("--weights is required for the dqn controller");
        weights = parse_weights(read_file(c.weights_path));
    }
    RunReport report = evaluate(scenario, c.controller, weights ? &*weights : nullptr, c.seeds);

    const fs::path dir(c.out_dir);
    const RunReport* one[] = {&report};
    write_file((dir / "report.json").string(), to_json(report).dump(1) + "\n");
    write_file((dir / "report.csv").string(), report_csv(report));
    write_file((dir / "episodes.csv").string(), episodes_csv(report));
    write_file((dir / "summary.csv").string(), summary_csv(one));
    return report;
}

namespace {

RunReport load_report(const std::string& path) {
    fs::path p(path);
    if (fs::is_directory(p)) p /= "report.json";
    json doc;
    try {
        doc = json::parse(read_file(p.string()));
    } catch (const json::parse_error& e) {
        throw ParseError("malformed report '" + p.string() + "': " + e.what());
    }
    return report_from_json(doc);
}

}  // namespace

json run_compare(const std::string& a, const std::string& b, const std::string& out_dir) {
    const RunReport ra = load_report(a);
    const RunReport rb = load_report(b);
    json doc = compare(ra, rb);
    const fs::path dir(out_dir);
    const RunReport* both[] = {&ra, &rb};
    write_file((dir / "comparison.json").string(), doc.dump(2) + "\n");
    write_file((dir / "summary.csv").string(), summary_csv(both));
    return doc;
}

}  // namespace tlrl
