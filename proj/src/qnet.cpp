#include "tlrl/qnet.hpp"

#include <algorithm>
#include <cmath>

#include "tlrl/error.hpp"

namespace tlrl {

using nlohmann::json;

QNetwork::QNetwork(const std::vector<std::size_t>& arch) {
    if (arch.size() < 2) throw ContractError("network needs at least an input and an output size");
    for (std::size_t i = 0; i + 1 < arch.size(); ++i) layers_.emplace_back(arch[i + 1], arch[i]);
}

QNetwork::QNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.w.size() != l.rows * l.cols || l.b.size() != l.rows)
            throw ContractError("layer " + std::to_string(i) + ": parameter sizes do not match rows x cols");
        if (i > 0 && l.cols != layers_[i - 1].rows)
            throw ContractError("layer " + std::to_string(i) + ": expects " + std::to_string(l.cols) +
                                " inputs but previous layer has " + std::to_string(layers_[i - 1].rows) + " outputs");
    }
}

QNetwork QNetwork::xavier(const std::vector<std::size_t>& arch, Rng& rng) {
    QNetwork net(arch);
    for (auto& l : net.layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
        for (auto& w : l.w) w = rng.uniform(-limit, limit);
    }
    return net;
}

std::vector<std::size_t> QNetwork::arch() const {
    std::vector<std::size_t> a;
    if (layers_.empty()) return a;
    a.push_back(layers_.front().cols);
    for (const auto& l : layers_) a.push_back(l.rows);
    return a;
}

bool QNetwork::all_finite() const {
    for (const auto& l : layers_) {
        for (const double v : l.w)
            if (!std::isfinite(v)) return false;
        for (const double v : l.b)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

void affine(const Layer& l, std::span<const double> x, std::vector<double>& y) {
    y.assign(l.b.begin(), l.b.end());
    for (std::size_t r = 0; r < l.rows; ++r) {
        const double* row = &l.w[r * l.cols];
        double acc = 0.0;
        for (std::size_t c = 0; c < l.cols; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

void check_input(const QNetwork& net, std::span<const double> x) {
    if (net.layers().empty()) throw ContractError("empty network");
    if (x.size() != net.input_dim())
        throw ContractError("input has " + std::to_string(x.size()) + " components, network expects " +
                            std::to_string(net.input_dim()));
}

}  // namespace

std::vector<std::vector<double>> forward_trace(const QNetwork& net, std::span<const double> x) {
    check_input(net, x);
    const auto& layers = net.layers();
    std::vector<std::vector<double>> acts(layers.size());
    std::span<const double> in = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        affine(layers[i], in, acts[i]);
        if (i + 1 < layers.size())
            for (auto& v : acts[i]) v = std::max(0.0, v);
        in = acts[i];
    }
    return acts;
}

std::vector<double> forward(const QNetwork& net, std::span<const double> x) {
    return std::move(forward_trace(net, x).back());
}

Gradients Gradients::zeros_like(const QNetwork& net) {
    Gradients g;
    for (const auto& l : net.layers()) g.layers.emplace_back(l.rows, l.cols);
    return g;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
    if (other.layers.size() != layers.size()) throw ContractError("gradient shape mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& a = layers[i];
        const auto& b = other.layers[i];
        if (a.w.size() != b.w.size() || a.b.size() != b.b.size()) throw ContractError("gradient shape mismatch");
        for (std::size_t k = 0; k < a.w.size(); ++k) a.w[k] += scale * b.w[k];
        for (std::size_t k = 0; k < a.b.size(); ++k) a.b[k] += scale * b.b[k];
    }
}

LossGrad backward(const QNetwork& net, std::span<const double> x, double td_target, std::size_t action) {
    const auto acts = forward_trace(net, x);
    const auto& layers = net.layers();
    if (action >= net.output_dim())
        throw ContractError("action " + std::to_string(action) + " out of range for " +
                            std::to_string(net.output_dim()) + " outputs");

    LossGrad out;
    const double err = acts.back()[action] - td_target;
    out.loss = err * err;
    out.grads = Gradients::zeros_like(net);

    // delta = dL/d(pre-activation) of the current layer
    std::vector<double> delta(net.output_dim(), 0.0);
    delta[action] = 2.0 * err;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const Layer& l = layers[li];
        Layer& g = out.grads.layers[li];
        std::span<const double> in = li == 0 ? x : std::span<const double>(acts[li - 1]);
        for (std::size_t r = 0; r < l.rows; ++r) {
            if (delta[r] == 0.0) continue;
            g.b[r] = delta[r];
            for (std::size_t c = 0; c < l.cols; ++c) g.w[r * l.cols + c] = delta[r] * in[c];
        }
        if (li == 0) break;
        std::vector<double> prev(l.cols, 0.0);
        for (std::size_t r = 0; r < l.rows; ++r) {
            if (delta[r] == 0.0) continue;
            for (std::size_t c = 0; c < l.cols; ++c) prev[c] += l.w[r * l.cols + c] * delta[r];
        }
        // rectifier derivative, taken as 0 at 0
        for (std::size_t c = 0; c < l.cols; ++c)
            if (!(acts[li - 1][c] > 0.0)) prev[c] = 0.0;
        delta = std::move(prev);
    }
    return out;
}

Adam::Adam(const QNetwork& net, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(Gradients::zeros_like(net)), v_(Gradients::zeros_like(net)) {}

void Adam::step(QNetwork& net, const Gradients& grads, double lr) {
    auto& layers = net.layers();
    if (grads.layers.size() != layers.size() || m_.layers.size() != layers.size())
        throw ContractError("optimizer step: shape mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        if (p.size() != g.size() || p.size() != m.size()) throw ContractError("optimizer step: shape mismatch");
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
            p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + epsilon_);
        }
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        update(layers[i].w, grads.layers[i].w, m_.layers[i].w, v_.layers[i].w);
        update(layers[i].b, grads.layers[i].b, m_.layers[i].b, v_.layers[i].b);
    }
}

json to_json(const QNetwork& net) {
    json layers = json::array();
    for (const auto& l : net.layers())
        layers.push_back({{"rows", l.rows}, {"cols", l.cols}, {"w", l.w}, {"b", l.b}});
    return {{"format_version", kWeightsFormatVersion},
            {"arch", net.arch()},
            {"activation", {{"hidden", "relu"}, {"output", "identity"}}},
            {"layers", layers}};
}

QNetwork network_from_json(const json& doc) {
    std::vector<Layer> layers;
    try {
        if (doc.at("format_version").get<int>() != kWeightsFormatVersion)
            throw ParseError("unsupported weights format_version");
        const auto arch = doc.at("arch").get<std::vector<std::size_t>>();
        const json& ls = doc.at("layers");
        if (!ls.is_array() || ls.empty()) throw ParseError("weights document: 'layers' must be a non-empty array");
        if (arch.size() != ls.size() + 1)
            throw ParseError("weights document: arch lists " + std::to_string(arch.size()) + " sizes for " +
                             std::to_string(ls.size()) + " layers");
        for (std::size_t i = 0; i < ls.size(); ++i) {
            const std::string tag = "layer " + std::to_string(i);
            Layer l;
            l.rows = ls[i].at("rows").get<std::size_t>();
            l.cols = ls[i].at("cols").get<std::size_t>();
            l.w = ls[i].at("w").get<std::vector<double>>();
            l.b = ls[i].at("b").get<std::vector<double>>();
            if (l.w.size() != l.rows * l.cols) throw ParseError(tag + ": w has " + std::to_string(l.w.size()) +
                                                                " entries, expected rows*cols = " +
                                                                std::to_string(l.rows * l.cols));
            if (l.b.size() != l.rows) throw ParseError(tag + ": b has " + std::to_string(l.b.size()) +
                                                       " entries, expected rows = " + std::to_string(l.rows));
            if (l.cols != arch[i] || l.rows != arch[i + 1])
                throw ParseError(tag + ": shape " + std::to_string(l.rows) + "x" + std::to_string(l.cols) +
                                 " does not match arch");
            layers.push_back(std::move(l));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed weights document: ") + e.what());
    }
    try {
        QNetwork net(std::move(layers));
        if (!net.all_finite()) throw ParseError("weights document contains non-finite parameters");
        return net;
    } catch (const ContractError& e) {
        throw ParseError(e.what());
    }
}

std::string serialize(const QNetwork& net) { return to_json(net).dump() + "\n"; }

QNetwork deserialize_network(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed weights document: ") + e.what());
    }
    return network_from_json(doc);
}

}  // namespace tlrl
