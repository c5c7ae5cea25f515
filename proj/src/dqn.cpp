#include "tlrl/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "tlrl/error.hpp"

namespace tlrl {

using nlohmann::json;

namespace {

constexpr double kWaitCap = 300.0;  // s
constexpr double kPhaseCap = 60.0;  // s

}  // namespace

Request action_to_request(std::size_t action) {
    switch (action) {
        case 0: return Request::ServeA;
        case 1: return Request::ServeB;
        case 2: return Request::AllRed;
    }
    throw ContractError("action " + std::to_string(action) + " out of range");
}

std::vector<std::size_t> incoming_lanes(const Network& network, const Junction& junction) {
    std::vector<std::size_t> out;
    for (const auto* axis : {&junction.axis_a, &junction.axis_b})
        for (const auto& id : *axis)
            if (const auto e = network.edge_index(id)) out.push_back(*e);
    return out;
}

std::size_t state_dim(const Network& network, const Junction& junction) {
    return 3 * incoming_lanes(network, junction).size() + 4;
}

namespace {

struct LaneStats {
    std::size_t vehicles = 0;
    std::size_t halted = 0;
    double wait = 0.0;
};

LaneStats lane_stats(const Simulation& sim, std::size_t edge) {
    LaneStats s;
    for (const auto& v : sim.lane(edge)) {
        ++s.vehicles;
        if (v.speed < kHaltingSpeed) ++s.halted;
        s.wait += v.edge_wait;
    }
    return s;
}

const Junction& junction_at(const Simulation& sim, std::size_t slot) {
    return sim.scenario().network.junctions.at(sim.signalized().at(slot));
}

}  // namespace

JunctionView observe(const Simulation& sim, std::size_t slot) {
    const Junction& j = junction_at(sim, slot);
    const JunctionSignal& sig = sim.signals().at(slot);
    const Network& net = sim.scenario().network;
    JunctionView view;
    double wait_sum = 0.0;
    std::size_t lanes = 0;
    for (int axis = 0; axis < 2; ++axis) {
        const Color c = axis == 0 ? sig.a : sig.b;
        for (const auto& id : axis == 0 ? j.axis_a : j.axis_b) {
            const auto e = net.edge_index(id);
            if (!e) continue;
            ++lanes;
            if (c == Color::Green) ++view.green_lanes;
            if (c == Color::Red) ++view.red_lanes;
            wait_sum += lane_stats(sim, *e).wait;
        }
    }
    view.mean_wait = lanes ? wait_sum / static_cast<double>(lanes) : 0.0;
    return view;
}

std::vector<double> featurize(const Simulation& sim, std::size_t slot) {
    const Junction& j = junction_at(sim, slot);
    const Network& net = sim.scenario().network;
    std::vector<double> x;
    x.reserve(state_dim(net, j));
    for (const std::size_t e : incoming_lanes(net, j)) {
        const double cap = lane_capacity(net.edges[e], sim.scenario().vehicle);
        const LaneStats s = lane_stats(sim, e);
        x.push_back(std::min(1.0, static_cast<double>(s.vehicles) / cap));
        x.push_back(std::min(1.0, static_cast<double>(s.halted) / cap));
        x.push_back(std::min(s.wait, kWaitCap) / kWaitCap);
    }
    const JunctionSignal& sig = sim.signals().at(slot);
    const bool serving_a = sig.a == Color::Green;
    const bool serving_b = sig.b == Color::Green;
    x.push_back(serving_a ? 1.0 : 0.0);
    x.push_back(serving_b ? 1.0 : 0.0);
    x.push_back(serving_a || serving_b ? 0.0 : 1.0);
    x.push_back(std::min(static_cast<double>(sig.elapsed), kPhaseCap) / kPhaseCap);
    return x;
}

RewardMode parse_reward_mode(const std::string& text) {
    if (text == "balanced") return RewardMode::Balanced;
    if (text == "literal") return RewardMode::Literal;
    throw ContractError("unknown reward mode '" + text + "' (expected literal or balanced)");
}

const char* to_string(RewardMode mode) noexcept {
    return mode == RewardMode::Literal ? "literal" : "balanced";
}

double waiting_penalty(double mean_wait) {
    if (mean_wait <= 0.0) return 0.0;
    return mean_wait < 5.0 ? -0.5 : -1.0;
}

double reward(const JunctionView& view, RewardMode mode) {
    const double imbalance = static_cast<double>(view.green_lanes - view.red_lanes);
    const double w = waiting_penalty(view.mean_wait);
    if (mode == RewardMode::Literal) return 0.2 * std::sqrt(std::max(0.0, imbalance * imbalance + w));
    return -0.2 * std::abs(imbalance) + w;
}

std::size_t select_action(std::span<const double> q, double epsilon, Rng& rng) {
    if (q.empty()) throw ContractError("select_action on empty q-values");
    if (epsilon > 0.0 && rng.uniform() < epsilon) return static_cast<std::size_t>(rng.below(q.size()));
    return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("replay buffer capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    if (t.action >= kNumActions) throw ContractError("transition action out of range");
    ++pushed_;
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) throw ContractError("replay buffer index out of range");
    return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    if (items_.size() < batch || items_.empty())
        throw ContractError("cannot sample " + std::to_string(batch) + " transitions from a buffer of " +
                            std::to_string(items_.size()));
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[rng.below(items_.size())]);
    return out;
}

double td_target(const Transition& t, const QNetwork& target, double gamma) {
    if (t.terminal) return t.reward;
    const auto q = forward(target, t.next_state);
    return t.reward + gamma * *std::max_element(q.begin(), q.end());
}

// --- hyperparameters

namespace {

std::size_t to_count(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long n = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0' || n < 0) throw ContractError("hyperparameter " + key + ": bad count '" + v + "'");
    return static_cast<std::size_t>(n);
}

double to_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || !std::isfinite(x))
        throw ContractError("hyperparameter " + key + ": bad number '" + v + "'");
    return x;
}

}  // namespace

void DqnHyper::set(const std::string& key, const std::string& value) {
    DqnHyper h = *this;
    if (key == "gamma") h.gamma = to_real(key, value);
    else if (key == "buffer_capacity") h.buffer_capacity = to_count(key, value);
    else if (key == "batch_size") h.batch_size = to_count(key, value);
    else if (key == "lr" || key == "learning_rate") h.learning_rate = to_real(key, value);
    else if (key == "epsilon_start") h.epsilon_start = to_real(key, value);
    else if (key == "epsilon_end") h.epsilon_end = to_real(key, value);
    else if (key == "epsilon_fraction") h.epsilon_fraction = to_real(key, value);
    else if (key == "target_sync") h.target_sync = to_count(key, value);
    else if (key == "warmup") h.warmup = to_count(key, value);
    else if (key == "decision_interval") h.decision_interval = static_cast<int>(to_count(key, value));
    else if (key == "hidden") {
        h.hidden.clear();
        std::size_t start = 0;
        while (start <= value.size()) {
            const auto comma = value.find(',', start);
            const auto part = value.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            h.hidden.push_back(to_count(key, part));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    } else {
        throw ContractError("unknown hyperparameter '" + key + "'");
    }

    if (!(h.gamma >= 0.0 && h.gamma <= 1.0)) throw ContractError("gamma must be in [0, 1]");
    if (h.buffer_capacity == 0 || h.batch_size == 0 || h.target_sync == 0 || h.decision_interval < 1)
        throw ContractError("hyperparameter " + key + " must be positive");
    if (!(h.learning_rate > 0.0)) throw ContractError("lr must be positive");
    if (!(h.epsilon_start >= 0.0 && h.epsilon_start <= 1.0 && h.epsilon_end >= 0.0 && h.epsilon_end <= 1.0))
        throw ContractError("epsilon bounds must be in [0, 1]");
    if (!(h.epsilon_fraction > 0.0 && h.epsilon_fraction <= 1.0)) throw ContractError("epsilon_fraction must be in (0, 1]");
    for (const auto n : h.hidden)
        if (n == 0) throw ContractError("hidden layer sizes must be positive");
    *this = std::move(h);
}

void DqnHyper::merge(const json& block) {
    if (!block.is_object()) throw ContractError("train block must be an object");
    for (const auto& [key, value] : block.items()) {
        if (value.is_string()) set(key, value.get<std::string>());
        else if (value.is_array()) {
            std::string joined;
            for (const auto& h : value) joined += (joined.empty() ? "" : ",") + h.dump();
            set(key, joined);
        } else set(key, value.dump());
    }
}

json DqnHyper::to_json() const {
    return {{"gamma", gamma},
            {"buffer_capacity", buffer_capacity},
            {"batch_size", batch_size},
            {"lr", learning_rate},
            {"epsilon_start", epsilon_start},
            {"epsilon_end", epsilon_end},
            {"epsilon_fraction", epsilon_fraction},
            {"target_sync", target_sync},
            {"warmup", warmup},
            {"decision_interval", decision_interval},
            {"hidden", hidden}};
}

double epsilon_at(const DqnHyper& hp, std::uint64_t step, std::uint64_t total_steps) {
    const double horizon = hp.epsilon_fraction * static_cast<double>(std::max<std::uint64_t>(total_steps, 1));
    const double frac = std::min(1.0, static_cast<double>(step) / horizon);
    return hp.epsilon_start + (hp.epsilon_end - hp.epsilon_start) * frac;
}

// --- agent

namespace {

std::vector<std::size_t> full_arch(std::size_t state_dim, const DqnHyper& hp) {
    std::vector<std::size_t> arch{state_dim};
    arch.insert(arch.end(), hp.hidden.begin(), hp.hidden.end());
    arch.push_back(kNumActions);
    return arch;
}

QNetwork init_network(std::size_t state_dim, const DqnHyper& hp, std::uint64_t seed) {
    Rng init(derive_seed(seed, streams::kInit, 0));
    return QNetwork::xavier(full_arch(state_dim, hp), init);
}

}  // namespace

DqnAgent::DqnAgent(std::size_t state_dim, const DqnHyper& hp, std::uint64_t seed)
    : hp_(hp),
      rng_(derive_seed(seed, streams::kAgent, 0)),
      online_(init_network(state_dim, hp, seed)),
      target_(sync_target(online_)),
      adam_(online_),
      buffer_(hp.buffer_capacity) {}

std::size_t DqnAgent::act(std::span<const double> state, double epsilon) {
    // Draw the exploration coin before evaluating so the stream does not
    // depend on network values.
    if (epsilon > 0.0 && rng_.uniform() < epsilon) return static_cast<std::size_t>(rng_.below(kNumActions));
    const auto q = forward(online_, state);
    return select_action(q, 0.0, rng_);
}

std::optional<double> DqnAgent::learn() {
    if (buffer_.size() < std::max(hp_.warmup, hp_.batch_size)) return std::nullopt;
    const auto batch = buffer_.sample(hp_.batch_size, rng_);
    Gradients total = Gradients::zeros_like(online_);
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const Transition* t : batch) {
        const double y = td_target(*t, target_, hp_.gamma);
        const LossGrad lg = backward(online_, t->state, y, t->action);
        loss += lg.loss * scale;
        total.add_scaled(lg.grads, scale);
    }
    if (!std::isfinite(loss)) throw Error("non-finite loss after " + std::to_string(gradient_steps_) + " gradient steps");
    adam_.step(online_, total, hp_.learning_rate);
    ++gradient_steps_;
    if (gradient_steps_ % hp_.target_sync == 0) target_ = sync_target(online_);
    return loss;
}

DqnController::DqnController(const Network& network, std::vector<QNetwork> nets, int decision_interval)
    : nets_(std::move(nets)), interval_(decision_interval) {
    for (const std::size_t j : network.signalized_junctions()) junctions_.push_back(&network.junctions[j]);
    if (nets_.size() != junctions_.size())
        throw ContractError("weights hold " + std::to_string(nets_.size()) + " networks for " +
                            std::to_string(junctions_.size()) + " signalized junctions");
    for (std::size_t i = 0; i < nets_.size(); ++i) {
        const std::size_t want = state_dim(network, *junctions_[i]);
        if (nets_[i].input_dim() != want || nets_[i].output_dim() != kNumActions)
            throw ContractError("network for junction '" + junctions_[i]->id + "' has shape " +
                                std::to_string(nets_[i].input_dim()) + "->" + std::to_string(nets_[i].output_dim()) +
                                ", scenario needs " + std::to_string(want) + "->" + std::to_string(kNumActions));
    }
    if (interval_ < 1) throw ContractError("decision interval must be positive");
    requests_.assign(nets_.size(), Request::ServeA);
}

SignalAssignment DqnController::decide(const Simulation& sim) {
    const long tick = std::lround(sim.clock());
    SignalAssignment out;
    out.reserve(nets_.size());
    for (std::size_t slot = 0; slot < nets_.size(); ++slot) {
        if (tick % interval_ == 0) {
            const auto q = forward(nets_[slot], featurize(sim, slot));
            requests_[slot] = action_to_request(static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin()));
        }
        out.push_back(apply_interlock(requests_[slot], sim.signals()[slot], *junctions_[slot]));
    }
    return out;
}

}  // namespace tlrl
