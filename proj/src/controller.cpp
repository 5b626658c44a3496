#include "ean/controller.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ean/ops.hpp"

namespace ean {

void ControllerConfig::validate() const {
    if (hidden == 0) throw std::invalid_argument("controller hidden width must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("controller learning rate must be finite and >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("controller momentum must lie in [0,1)");
    if (!(hidden_bias_std >= 0.0)) throw std::invalid_argument("hidden bias std must be >= 0");
    if (ppo_period == 0) throw std::invalid_argument("PPO period h must be >= 1");
    if (!(prob_floor > 0.0 && prob_floor < 0.5)) throw std::invalid_argument("probability floor must lie in (0, 0.5)");
    if (clip_ratio && !(ratio_min > 0.0 && ratio_min <= 1.0 && ratio_max >= 1.0)) {
        throw std::invalid_argument("ratio clip range must satisfy 0 < min <= 1 <= max");
    }
}

std::vector<double> realized_probs(std::span<const double> p, const ConnectionScheme& a) {
    if (p.size() != a.size()) {
        throw std::invalid_argument("probability vector has " + std::to_string(p.size()) + " entries but scheme has " +
                                    std::to_string(a.size()) + " bits");
    }
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = a[i] ? p[i] : 1.0 - p[i];
    return out;
}

double mean_prob(std::span<const double> p_hat) {
    if (p_hat.empty()) return 0.0;
    return std::accumulate(p_hat.begin(), p_hat.end(), 0.0) / static_cast<double>(p_hat.size());
}

SampledScheme sample_and_score(std::span<const double> p, std::mt19937_64& rng) {
    std::vector<std::uint8_t> bits(p.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw std::invalid_argument("connection probabilities must lie in [0,1]");
        bits[i] = u(rng) < p[i] ? 1 : 0;
    }
    SampledScheme s{ConnectionScheme(std::move(bits)), {}, 0.0};
    s.p_hat = realized_probs(p, s.scheme);
    for (double v : s.p_hat) s.log_prob += std::log(v);
    return s;
}

Controller::Controller(std::size_t blocks, ControllerConfig config, std::uint64_t seed)
    : blocks_(blocks), config_(config) {
    if (blocks == 0) throw std::invalid_argument("controller needs at least one block");
    config_.validate();
    const std::size_t h = config_.hidden;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // W1 multiplies the constant zero input, so it never moves; it is kept
    // so the network matches a general fully connected layout.
    Tensor w1({h, blocks});
    const double s1 = std::sqrt(1.0 / static_cast<double>(blocks));
    for (auto& v : w1.data()) v = s1 * gauss(rng);
    Tensor b1({h});
    for (auto& v : b1.data()) v = config_.hidden_bias_std * gauss(rng);
    w1_ = Parameter("controller.w1", std::move(w1));
    b1_ = Parameter("controller.b1", std::move(b1));
    // zero output layer: p starts at exactly 0.5
    w2_ = Parameter("controller.w2", Tensor({blocks, h}));
    b2_ = Parameter("controller.b2", Tensor({blocks}));
}

Controller::Activations Controller::activate() const {
    const std::size_t h = config_.hidden;
    Activations act;
    act.hidden.resize(h);
    // q0 = 0, so the pre-activation is b1
    for (std::size_t j = 0; j < h; ++j) act.hidden[j] = std::tanh(b1_.value[j]);
    act.raw.resize(blocks_);
    act.clamped.resize(blocks_);
    const double lo = config_.prob_floor, hi = 1.0 - config_.prob_floor;
    for (std::size_t i = 0; i < blocks_; ++i) {
        double z = b2_.value[i];
        for (std::size_t j = 0; j < h; ++j) z += w2_.value[i * h + j] * act.hidden[j];
        act.raw[i] = sigmoid(z);
        act.clamped[i] = std::clamp(act.raw[i], lo, hi);
    }
    return act;
}

std::vector<double> Controller::forward() const { return activate().clamped; }

void Controller::backprop(const Activations& act, std::span<const double> grad_logits) {
    const std::size_t h = config_.hidden;
    std::vector<double> dh(h, 0.0);
    for (std::size_t i = 0; i < blocks_; ++i) {
        const double g = grad_logits[i];
        if (g == 0.0) continue;
        b2_.grad[i] += g;
        for (std::size_t j = 0; j < h; ++j) {
            w2_.grad[i * h + j] += g * act.hidden[j];
            dh[j] += g * w2_.value[i * h + j];
        }
    }
    for (std::size_t j = 0; j < h; ++j) {
        b1_.grad[j] += dh[j] * (1.0 - act.hidden[j] * act.hidden[j]);
        // w1 gradient is dh * q0 = 0
    }
}

namespace {

// d log p-hat_i / dz_i, zero where the clamp is active.
double dlog_phat_dz(double raw, double clamped, bool bit) {
    if (raw != clamped) return 0.0;
    return bit ? 1.0 - raw : -raw;
}

}  // namespace

double Controller::reinforce_objective(const ConnectionScheme& a, double reward) const {
    const auto p = forward();
    const auto ph = realized_probs(p, a);
    double s = 0.0;
    for (double v : ph) s += std::log(v);
    return reward * s;
}

std::vector<double> Controller::reinforce_gradient(const ConnectionScheme& a, double reward) {
    if (a.size() != blocks_) throw std::invalid_argument("scheme length does not match controller output");
    if (!std::isfinite(reward)) throw std::invalid_argument("reward must be finite");
    for (Parameter* p : parameters()) p->zero_grad();
    const Activations act = activate();
    std::vector<double> gz(blocks_);
    for (std::size_t i = 0; i < blocks_; ++i) gz[i] = reward * dlog_phat_dz(act.raw[i], act.clamped[i], a[i]);
    backprop(act, gz);
    auto g = flat_grads();
    for (Parameter* p : parameters()) p->zero_grad();
    return g;
}

void Controller::apply_ascent(const std::vector<double>& ascent) {
    // momentum SGD descends, so feed it the negated ascent direction
    std::size_t k = 0;
    auto params = parameters();
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] = -ascent[k++];
    }
    sgd_momentum_step(params, OptimizerConfig{config_.learning_rate, config_.momentum, 0.0});
}

void Controller::reinforce_update(const ConnectionScheme& a, double reward) {
    apply_ascent(reinforce_gradient(a, reward));
    ++reinforce_steps_;
}

double Controller::ppo_objective(std::span<const Rollout> rollouts) const {
    if (rollouts.empty()) return 0.0;
    const auto p = forward();
    double total = 0.0;
    for (const Rollout& r : rollouts) {
        const auto now = realized_probs(p, r.scheme);
        const auto old = realized_probs(r.probs, r.scheme);
        double s = 0.0;
        for (std::size_t i = 0; i < blocks_; ++i) s += now[i] / old[i];
        total += r.reward * s;
    }
    return total / static_cast<double>(rollouts.size());
}

std::vector<double> Controller::ppo_gradient(std::span<const Rollout> rollouts) {
    for (Parameter* p : parameters()) p->zero_grad();
    if (rollouts.empty()) return flat_grads();
    const Activations act = activate();
    const double inv_n = 1.0 / static_cast<double>(rollouts.size());
    std::vector<double> gz(blocks_, 0.0);
    for (const Rollout& r : rollouts) {
        if (r.scheme.size() != blocks_ || r.probs.size() != blocks_) {
            throw std::invalid_argument("buffered tuple does not match controller output size");
        }
        const auto now = realized_probs(act.clamped, r.scheme);
        const auto old = realized_probs(r.probs, r.scheme);
        for (std::size_t i = 0; i < blocks_; ++i) {
            double w = now[i] / old[i];
            if (config_.clip_ratio) w = std::clamp(w, config_.ratio_min, config_.ratio_max);
            gz[i] += inv_n * r.reward * w * dlog_phat_dz(act.raw[i], act.clamped[i], r.scheme[i]);
        }
    }
    backprop(act, gz);
    auto g = flat_grads();
    for (Parameter* p : parameters()) p->zero_grad();
    return g;
}

bool Controller::ppo_update(std::span<const Rollout> rollouts) {
    if (rollouts.empty()) {
        std::clog << "warning: PPO update skipped, rollout buffer is empty\n";
        return false;
    }
    apply_ascent(ppo_gradient(rollouts));
    return true;
}

void Controller::push_rollout(Rollout r) {
    if (r.scheme.size() != blocks_ || r.probs.size() != blocks_) {
        throw std::invalid_argument("rollout does not match controller output size");
    }
    buffer_.push_back(std::move(r));
    while (buffer_.size() > config_.effective_capacity()) buffer_.pop_front();
}

std::vector<Rollout> Controller::draw_from_buffer(std::mt19937_64& rng) const {
    std::vector<std::size_t> idx(buffer_.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t n = std::min(config_.effective_ppo_batch(), idx.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<Rollout> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(buffer_[idx[i]]);
    return out;
}

std::vector<Parameter*> Controller::parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

std::vector<const Parameter*> Controller::parameters() const { return {&w1_, &b1_, &w2_, &b2_}; }

std::vector<double> Controller::flat_parameters() const {
    std::vector<double> out;
    for (const Parameter* p : parameters()) out.insert(out.end(), p->value.data().begin(), p->value.data().end());
    return out;
}

std::vector<double> Controller::flat_grads() const {
    std::vector<double> out;
    for (const Parameter* p : parameters()) out.insert(out.end(), p->grad.data().begin(), p->grad.data().end());
    return out;
}

}  // namespace ean
