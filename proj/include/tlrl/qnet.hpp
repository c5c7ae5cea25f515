#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tlrl/rng.hpp"

namespace tlrl {

/// Dense layer, y = W x + b with W stored row-major (rows = outputs).
struct Layer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> w;
    std::vector<double> b;

    Layer() = default;
    Layer(std::size_t out, std::size_t in) : rows(out), cols(in), w(out * in, 0.0), b(out, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return w[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return w[r * cols + c]; }

    bool operator==(const Layer&) const = default;
};

/// Multi-layer perceptron: rectifier on hidden layers, identity output.
class QNetwork {
public:
    QNetwork() = default;
    /// Zero-initialized network with layer sizes `arch` = {d_in, h1, ..., d_out}.
    explicit QNetwork(const std::vector<std::size_t>& arch);
    /// Network made from explicit layers; throws ContractError if the
    /// dimensions do not chain.
    explicit QNetwork(std::vector<Layer> layers);

    /// Xavier-uniform weights, zero biases.
    static QNetwork xavier(const std::vector<std::size_t>& arch, Rng& rng);

    std::vector<std::size_t> arch() const;
    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().cols; }
    std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().rows; }

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    bool all_finite() const;

    bool operator==(const QNetwork&) const = default;

private:
    std::vector<Layer> layers_;
};

/// Q-values for input `x`. Throws ContractError if |x| != input_dim.
std::vector<double> forward(const QNetwork& net, std::span<const double> x);

/// Post-activation output of every layer (last entry equals forward()).
std::vector<std::vector<double>> forward_trace(const QNetwork& net, std::span<const double> x);

/// Parameter-shaped container for gradients and optimizer moments.
struct Gradients {
    std::vector<Layer> layers;

    static Gradients zeros_like(const QNetwork& net);
    /// this += scale * other
    void add_scaled(const Gradients& other, double scale);
};

struct LossGrad {
    double loss = 0.0;
    Gradients grads;
};

/// Squared TD error on the taken action and its gradient with respect to
/// every parameter. Outputs other than `action` receive zero gradient.
LossGrad backward(const QNetwork& net, std::span<const double> x, double td_target, std::size_t action);

/// Adam with per-network first and second moments.
class Adam {
public:
    explicit Adam(const QNetwork& net, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    void step(QNetwork& net, const Gradients& grads, double lr);
    long steps() const noexcept { return t_; }
    const Gradients& first_moment() const noexcept { return m_; }
    const Gradients& second_moment() const noexcept { return v_; }

private:
    double beta1_, beta2_, epsilon_;
    long t_ = 0;
    Gradients m_, v_;
};

inline constexpr int kWeightsFormatVersion = 1;

/// {format_version, arch, layers: [{rows, cols, w, b}]}
nlohmann::json to_json(const QNetwork& net);
/// Throws ParseError on malformed input and on inconsistent dimensions
/// (naming the offending layer).
QNetwork network_from_json(const nlohmann::json& doc);

std::string serialize(const QNetwork& net);
QNetwork deserialize_network(std::string_view text);

}  // namespace tlrl
