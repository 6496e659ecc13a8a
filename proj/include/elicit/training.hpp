#pragma once
// Advantage-weighted regression arithmetic: advantages from returns-to-go
// and value predictions, clipped exponential weights with unit-mean batch
// normalization and alpha-interpolation (alpha=0 recovers plain SFT), and
// the weighted policy / value losses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace elicit {

struct AWRConfig {
    double temperature = 1.0;
    double alpha = 0.25;     // 0 = SFT reduction, 1 = pure advantage weighting
    double gamma = 0.9;
    double weight_max = 20.0;
    std::size_t batch_size = 16;
    double learning_rate = 5e-2;
    std::size_t epochs = 3;
    std::uint64_t seed = 0;
    std::size_t max_consecutive_failures = 5;

    void validate() const {
        if (temperature <= 0.0) throw std::invalid_argument("temperature must be > 0");
        if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must lie in [0, 1]");
        if (weight_max < 1.0) throw std::invalid_argument("weight_max must be >= 1");
    }
};

// A_i = RTG_i - v(S_i), elementwise.
inline std::vector<double> compute_advantages(const std::vector<double>& returns_to_go,
                                              const std::vector<double>& value_predictions) {
    if (returns_to_go.size() != value_predictions.size())
        throw std::invalid_argument("returns/value size mismatch");
    std::vector<double> adv(returns_to_go.size());
    for (std::size_t i = 0; i < adv.size(); ++i) {
        if (!std::isfinite(value_predictions[i]))
            throw std::runtime_error("non-finite value prediction");
        adv[i] = returns_to_go[i] - value_predictions[i];
    }
    return adv;
}

// w_hat = clip(exp(A/T), weight_max), normalized to mean 1 within the batch,
// then blended: w = (1 - alpha) + alpha * w_hat.
inline std::vector<double> compute_weights(const std::vector<double>& advantages,
                                           const AWRConfig& cfg) {
    cfg.validate();
    if (advantages.empty()) return {};
    std::vector<double> w(advantages.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::min(std::exp(advantages[i] / cfg.temperature), cfg.weight_max);
        sum += w[i];
    }
    double mean = sum / static_cast<double>(w.size());
    for (double& x : w) x = (1.0 - cfg.alpha) + cfg.alpha * (x / mean);
    return w;
}

// L_pi = -(1/|B|) sum_i w_i * sum_l logp(target token l of sample i).
inline double policy_loss(const std::vector<double>& weights,
                          const std::vector<std::vector<double>>& masked_token_logprobs) {
    if (weights.size() != masked_token_logprobs.size())
        throw std::invalid_argument("weights/logprobs size mismatch");
    std::size_t masked = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double s = 0.0;
        for (double lp : masked_token_logprobs[i]) {
            s += lp;
            ++masked;
        }
        total += weights[i] * s;
    }
    if (masked == 0) throw std::invalid_argument("batch has zero masked tokens");
    return -total / static_cast<double>(weights.size());
}

// L_v = (1/|B|) sum_i (v_i - RTG_i)^2.
inline double value_loss(const std::vector<double>& value_predictions,
                         const std::vector<double>& returns_to_go) {
    if (value_predictions.size() != returns_to_go.size())
        throw std::invalid_argument("value/returns size mismatch");
    if (value_predictions.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < value_predictions.size(); ++i) {
        double d = value_predictions[i] - returns_to_go[i];
        total += d * d;
    }
    return total / static_cast<double>(value_predictions.size());
}

// Linear map from hidden dimension to a scalar.
struct ValueHead {
    std::vector<double> weight;
    double bias = 0.0;

    explicit ValueHead(std::size_t dim = 0) : weight(dim, 0.0) {}

    double predict(const std::vector<double>& hidden) const {
        if (hidden.size() != weight.size())
            throw std::invalid_argument("value head dimension mismatch");
        double v = bias;
        for (std::size_t i = 0; i < weight.size(); ++i) v += weight[i] * hidden[i];
        return v;
    }

    // Gradient of L_v over a batch of (hidden, rtg) pairs; hidden states are
    // treated as constants (the critic loss only updates psi).
    void value_loss_grad(const std::vector<std::vector<double>>& hidden,
                         const std::vector<double>& returns_to_go,
                         std::vector<double>& grad_weight, double& grad_bias) const {
        grad_weight.assign(weight.size(), 0.0);
        grad_bias = 0.0;
        const double inv_n = 1.0 / static_cast<double>(hidden.size());
        for (std::size_t i = 0; i < hidden.size(); ++i) {
            double dv = 2.0 * (predict(hidden[i]) - returns_to_go[i]) * inv_n;
            for (std::size_t j = 0; j < weight.size(); ++j)
                grad_weight[j] += dv * hidden[i][j];
            grad_bias += dv;
        }
    }
};

}  // namespace elicit
