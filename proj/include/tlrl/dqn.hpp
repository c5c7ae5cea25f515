#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlrl/controllers.hpp"
#include "tlrl/qnet.hpp"
#include "tlrl/rng.hpp"
#include "tlrl/simcore.hpp"

namespace tlrl {

inline constexpr std::size_t kNumActions = 3;

/// Agent action index -> interlock request: 0 serve A, 1 serve B, 2 all red.
Request action_to_request(std::size_t action);

/// Incoming lanes of a signalized junction, axis A first then axis B.
std::vector<std::size_t> incoming_lanes(const Network& network, const Junction& junction);

/// d_in = 3 * lanes + 4.
std::size_t state_dim(const Network& network, const Junction& junction);

/// Per-lane traffic of one junction and the colors it shows.
struct JunctionView {
    int green_lanes = 0;
    int red_lanes = 0;
    double mean_wait = 0.0;  ///< w_t: mean over incoming lanes of the lane's accumulated halt time
};

JunctionView observe(const Simulation& sim, std::size_t slot);

/// State vector of signalized junction `slot`: per lane (density, queue,
/// wait), then the phase one-hot (serving A, serving B, other) and the
/// time in phase. Every component is in [0, 1].
std::vector<double> featurize(const Simulation& sim, std::size_t slot);

enum class RewardMode { Balanced, Literal };

RewardMode parse_reward_mode(const std::string& text);
const char* to_string(RewardMode mode) noexcept;

/// Waiting penalty W: 0 when w_t = 0, -0.5 below 5 s, -1 from 5 s on.
double waiting_penalty(double mean_wait);

/// Literal: 0.2 * sqrt(max(0, (green - red)^2 + W)).
/// Balanced: -0.2 * |green - red| + W.
double reward(const JunctionView& view, RewardMode mode);

/// Epsilon-greedy over `q`; ties go to the lowest index.
std::size_t select_action(std::span<const double> q, double epsilon, Rng& rng);

struct Transition {
    std::vector<double> state;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool terminal = false;

    bool operator==(const Transition&) const = default;
};

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    /// Uniform with replacement. Throws ContractError if size() < batch.
    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    std::uint64_t pushed() const noexcept { return pushed_; }
    /// i-th oldest stored transition.
    const Transition& at(std::size_t i) const;

private:
    std::size_t capacity_;
    std::vector<Transition> items_;
    std::size_t head_ = 0;  // oldest slot once full
    std::uint64_t pushed_ = 0;
};

/// r for terminal transitions, else r + gamma * max_a Q_target(s', a).
double td_target(const Transition& t, const QNetwork& target, double gamma);

/// Deep copy of the online network.
inline QNetwork sync_target(const QNetwork& online) { return online; }

struct DqnHyper {
    double gamma = 0.95;
    std::size_t buffer_capacity = 10000;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_fraction = 0.7;  ///< share of all decisions over which epsilon decays
    std::size_t target_sync = 500;  ///< gradient steps between target syncs
    std::size_t warmup = 500;       ///< transitions stored before the first gradient step
    int decision_interval = 5;      ///< simulated seconds per agent decision
    std::vector<std::size_t> hidden = {64, 64};

    /// Sets one field from its textual form. Throws ContractError on an
    /// unknown key or bad value.
    void set(const std::string& key, const std::string& value);
    void merge(const nlohmann::json& block);
    nlohmann::json to_json() const;
};

/// Linear epsilon schedule over decision steps.
double epsilon_at(const DqnHyper& hp, std::uint64_t step, std::uint64_t total_steps);

/// Online and target networks, optimizer, replay buffer and sampling
/// stream of one junction's agent.
class DqnAgent {
public:
    DqnAgent(std::size_t state_dim, const DqnHyper& hp, std::uint64_t seed);

    std::size_t act(std::span<const double> state, double epsilon);
    void remember(Transition t) { buffer_.push(std::move(t)); }

    /// One minibatch gradient step once the buffer is warm; returns the
    /// mean squared TD error, or nullopt if no step was taken.
    std::optional<double> learn();

    const QNetwork& online() const noexcept { return online_; }
    const QNetwork& target() const noexcept { return target_; }
    const ReplayBuffer& buffer() const noexcept { return buffer_; }
    std::uint64_t gradient_steps() const noexcept { return gradient_steps_; }

private:
    DqnHyper hp_;
    Rng rng_;
    QNetwork online_;
    QNetwork target_;
    Adam adam_;
    ReplayBuffer buffer_;
    std::uint64_t gradient_steps_ = 0;
};

/// Greedy (epsilon = 0) controller driven by trained networks, one per
/// signalized junction. Decides every `decision_interval` seconds and lets
/// the interlock legalize the request on every step.
class DqnController final : public Controller {
public:
    DqnController(const Network& network, std::vector<QNetwork> nets, int decision_interval);

    std::string name() const override { return "dqn"; }
    SignalAssignment decide(const Simulation& sim) override;

private:
    std::vector<const Junction*> junctions_;
    std::vector<QNetwork> nets_;
    std::vector<Request> requests_;
    int interval_;
};

}  // namespace tlrl
