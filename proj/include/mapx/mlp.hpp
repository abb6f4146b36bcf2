#pragma once

// Small dense multi-layer perceptron with reverse-mode gradients and an Adam
// optimizer. Parameters live in one flat buffer (layer by layer: row-major
// weights out x in, then biases) so optimizers, finite-difference checks, and
// serialization all work on a single span.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mapx/random.hpp"

namespace mapx {

enum class Activation { identity, relu, tanh };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

class Mlp {
public:
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using WeightMap = Eigen::Map<RowMatrix>;
    using ConstWeightMap = Eigen::Map<const RowMatrix>;
    using BiasMap = Eigen::Map<Eigen::VectorXd>;
    using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

    /// Intermediate values of one forward pass, consumed by backward().
    struct Tape {
        std::vector<Eigen::VectorXd> inputs;  // input of each layer
        std::vector<Eigen::VectorXd> outputs; // post-activation output of each layer
    };

    Mlp() = default;

    /// Hidden layers use `hidden`; the output layer is affine.
    Mlp(std::vector<int> widths, Activation hidden) : widths_(std::move(widths)), hidden_(hidden) {
        if (widths_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            if (widths_[l] <= 0 || widths_[l + 1] <= 0) throw std::invalid_argument("Mlp widths must be positive");
            weight_offset_.push_back(total);
            total += static_cast<std::size_t>(widths_[l]) * widths_[l + 1];
            bias_offset_.push_back(total);
            total += static_cast<std::size_t>(widths_[l + 1]);
        }
        params_.assign(total, 0.0);
    }

    const std::vector<int>& widths() const { return widths_; }
    Activation hidden_activation() const { return hidden_; }
    std::size_t layer_count() const { return widths_.size() - 1; }
    int input_size() const { return widths_.front(); }
    int output_size() const { return widths_.back(); }

    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }

    WeightMap weight(std::size_t l) {
        return WeightMap(params_.data() + weight_offset_[l], widths_[l + 1], widths_[l]);
    }
    ConstWeightMap weight(std::size_t l) const {
        return ConstWeightMap(params_.data() + weight_offset_[l], widths_[l + 1], widths_[l]);
    }
    BiasMap bias(std::size_t l) { return BiasMap(params_.data() + bias_offset_[l], widths_[l + 1]); }
    ConstBiasMap bias(std::size_t l) const { return ConstBiasMap(params_.data() + bias_offset_[l], widths_[l + 1]); }

    /// He-uniform weights for ReLU hidden layers, Glorot-uniform otherwise; zero biases.
    void init_random(Rng& rng) {
        for (std::size_t l = 0; l < layer_count(); ++l) {
            const double fan_in = widths_[l], fan_out = widths_[l + 1];
            const double limit = hidden_ == Activation::relu && l + 1 < layer_count()
                                     ? std::sqrt(6.0 / fan_in)
                                     : std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            auto w = weight(l);
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
            bias(l).setZero();
        }
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        check_input(x);
        Eigen::VectorXd a = x;
        for (std::size_t l = 0; l < layer_count(); ++l) {
            Eigen::VectorXd z = weight(l) * a + bias(l);
            a = activate(std::move(z), l);
        }
        return a;
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& x, Tape& tape) const {
        check_input(x);
        tape.inputs.resize(layer_count());
        tape.outputs.resize(layer_count());
        Eigen::VectorXd a = x;
        for (std::size_t l = 0; l < layer_count(); ++l) {
            tape.inputs[l] = a;
            Eigen::VectorXd z = weight(l) * a + bias(l);
            a = activate(std::move(z), l);
            tape.outputs[l] = a;
        }
        return a;
    }

    /// Accumulates dL/dparams into `grad` (same layout as parameters()) given
    /// dL/doutput, and returns dL/dinput.
    Eigen::VectorXd backward(const Tape& tape, const Eigen::VectorXd& upstream, std::span<double> grad) const {
        if (grad.size() != params_.size()) throw std::invalid_argument("Mlp::backward: gradient buffer size mismatch");
        if (upstream.size() != output_size()) throw std::invalid_argument("Mlp::backward: upstream size mismatch");
        if (tape.inputs.size() != layer_count()) throw std::invalid_argument("Mlp::backward: tape does not match net");
        Eigen::VectorXd delta = upstream;
        for (std::size_t l = layer_count(); l-- > 0;) {
            delta = activation_backward(delta, tape.outputs[l], l);
            WeightMap gw(grad.data() + weight_offset_[l], widths_[l + 1], widths_[l]);
            BiasMap gb(grad.data() + bias_offset_[l], widths_[l + 1]);
            gw.noalias() += delta * tape.inputs[l].transpose();
            gb += delta;
            delta = weight(l).transpose() * delta;
        }
        return delta;
    }

private:
    bool is_hidden(std::size_t l) const { return l + 1 < layer_count(); }

    void check_input(const Eigen::VectorXd& x) const {
        if (x.size() != input_size())
            throw std::invalid_argument("Mlp: input has " + std::to_string(x.size()) + " entries, expected " +
                                        std::to_string(input_size()));
    }

    Eigen::VectorXd activate(Eigen::VectorXd z, std::size_t l) const {
        if (!is_hidden(l)) return z;
        switch (hidden_) {
            case Activation::relu: return z.cwiseMax(0.0);
            case Activation::tanh: return z.array().tanh().matrix();
            case Activation::identity: return z;
        }
        return z;
    }

    Eigen::VectorXd activation_backward(const Eigen::VectorXd& delta, const Eigen::VectorXd& out,
                                        std::size_t l) const {
        if (!is_hidden(l)) return delta;
        switch (hidden_) {
            case Activation::relu: return (out.array() > 0.0).select(delta, 0.0);
            case Activation::tanh: return (delta.array() * (1.0 - out.array().square())).matrix();
            case Activation::identity: return delta;
        }
        return delta;
    }

    std::vector<int> widths_;
    Activation hidden_ = Activation::relu;
    std::vector<std::size_t> weight_offset_, bias_offset_;
    std::vector<double> params_;
};

/// Adam with bias correction.
class AdamOptimizer {
public:
    AdamOptimizer() = default;
    AdamOptimizer(std::size_t parameter_count, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(parameter_count, 0.0),
          v_(parameter_count, 0.0) {}

    double learning_rate() const { return lr_; }
    long steps() const { return t_; }

    void step(std::span<double> params, std::span<const double> grad) {
        if (params.size() != m_.size() || grad.size() != m_.size())
            throw std::invalid_argument("AdamOptimizer::step: size mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        }
    }

private:
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::vector<double> m_, v_;
    long t_ = 0;
};

}  // namespace mapx
