#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "ean/scheme.hpp"
#include "ean/tensor.hpp"

namespace ean {

struct ControllerConfig {
    std::size_t hidden = 64;
    double hidden_bias_std = 0.05;  // b1 ~ N(0, std^2); sets tanh(b1), the features seen by the output layer
    double learning_rate = 5e-2;
    double momentum = 0.7;
    std::size_t ppo_period = 10;      // h
    std::size_t buffer_capacity = 0;  // 0 means 10 * h
    std::size_t ppo_batch = 0;        // tuples drawn per PPO update; 0 means h
    bool clip_ratio = true;
    double ratio_min = 0.1;
    double ratio_max = 10.0;
    double prob_floor = 1e-6;  // p is clamped to [floor, 1 - floor] before logs

    void validate() const;
    std::size_t effective_capacity() const { return buffer_capacity ? buffer_capacity : 10 * ppo_period; }
    std::size_t effective_ppo_batch() const { return ppo_batch ? ppo_batch : ppo_period; }
};

/// p-hat_i = (1 - a_i)(1 - p_i) + a_i p_i, the probability of the realized bit.
std::vector<double> realized_probs(std::span<const double> p, const ConnectionScheme& a);

/// Mean of the realized-bit probabilities; approaches 1 as the policy
/// becomes deterministic.
double mean_prob(std::span<const double> p_hat);

struct SampledScheme {
    ConnectionScheme scheme;
    std::vector<double> p_hat;
    double log_prob = 0.0;
};

SampledScheme sample_and_score(std::span<const double> p, std::mt19937_64& rng);

/// (p_theta_old, a, G(a)) kept for importance-weighted reuse.
struct Rollout {
    std::vector<double> probs;
    ConnectionScheme scheme;
    double reward = 0.0;
};

/// Fully connected policy chi_theta(q0) with constant input q0 = 0:
/// tanh hidden layer, sigmoid output per block.
class Controller {
public:
    Controller(std::size_t blocks, ControllerConfig config, std::uint64_t seed);

    std::size_t blocks() const noexcept { return blocks_; }
    const ControllerConfig& config() const noexcept { return config_; }

    /// Connection probabilities, clamped to [floor, 1 - floor].
    std::vector<double> forward() const;

    /// G * sum_i log p-hat_i at the current parameters.
    double reinforce_objective(const ConnectionScheme& a, double reward) const;
    /// Gradient of reinforce_objective, flattened in parameters() order.
    std::vector<double> reinforce_gradient(const ConnectionScheme& a, double reward);
    /// theta <- theta + eta * grad(G * sum log p-hat) through momentum SGD.
    void reinforce_update(const ConnectionScheme& a, double reward);

    /// mean over tuples of G * sum_i p-hat_i(theta) / p-hat_i(theta_old);
    /// its gradient is the unclipped importance-weighted policy gradient.
    double ppo_objective(std::span<const Rollout> rollouts) const;
    /// mean over tuples of G * sum_i w_i * grad log p-hat_i, w_i the
    /// (optionally clipped) importance ratio.
    std::vector<double> ppo_gradient(std::span<const Rollout> rollouts);
    /// Returns false (and warns) when there is nothing to learn from.
    bool ppo_update(std::span<const Rollout> rollouts);

    void push_rollout(Rollout r);
    const std::deque<Rollout>& buffer() const noexcept { return buffer_; }
    /// Up to effective_ppo_batch() distinct buffered tuples, drawn uniformly.
    std::vector<Rollout> draw_from_buffer(std::mt19937_64& rng) const;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::vector<double> flat_parameters() const;

    std::size_t reinforce_steps() const noexcept { return reinforce_steps_; }

private:
    struct Activations {
        std::vector<double> hidden;
        std::vector<double> raw;      // sigmoid(z) before clamping
        std::vector<double> clamped;
    };
    Activations activate() const;
    /// Back-propagates per-output dL/dz into the gradient buffers.
    void backprop(const Activations& act, std::span<const double> grad_logits);
    std::vector<double> flat_grads() const;
    void apply_ascent(const std::vector<double>& ascent);

    std::size_t blocks_;
    ControllerConfig config_;
    Parameter w1_;  // [hidden, m]
    Parameter b1_;  // [hidden]
    Parameter w2_;  // [m, hidden]
    Parameter b2_;  // [m]
    std::deque<Rollout> buffer_;
    std::size_t reinforce_steps_ = 0;
};

}  // namespace ean
