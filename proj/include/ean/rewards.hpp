#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ean/scheme.hpp"
#include "ean/tensor.hpp"

namespace ean {

class Supernet;
struct Dataset;

struct RewardConfig {
    double lambda1 = 0.5;  // sparsity
    double lambda2 = 1.0;  // validation accuracy
    double lambda3 = 0.1;  // exploration bonus
    double rnd_learning_rate = 0.01;
    std::size_t rnd_target_hidden = 32;
    std::size_t rnd_predictor_hidden = 64;
    std::size_t rnd_output = 8;
    double rnd_target_scale = 1.0;  // multiplies the target's init std
    // divide the bonus by its running standard deviation
    bool normalize_rnd = false;

    void validate() const;
};

/// 1 - ||a||_0 / m.
double sparsity_reward(const ConnectionScheme& a);

/// Validation accuracy of the subnetwork as a fraction in [0,1].
double validation_reward(const Supernet& net, const ConnectionScheme& a, const Dataset& validation);

/// lambda1 * g_spa + lambda2 * g_val + lambda3 * g_rnd.
double combined_reward(const RewardConfig& config, double g_spa, double g_val, double g_rnd);

/// One-hidden-layer tanh net used for both halves of the RND pair.
struct SmallMlp {
    Parameter w1;  // [hidden, in]
    Parameter b1;
    Parameter w2;  // [out, hidden]
    Parameter b2;

    std::vector<double> forward(const std::vector<double>& x, std::vector<double>* hidden = nullptr) const;
    std::vector<Parameter*> parameters() { return {&w1, &b1, &w2, &b2}; }
};

/// Frozen random target sigma1 and trainable predictor sigma2. The bonus is
/// large for schemes the predictor has not been trained on.
class RNDPair {
public:
    RNDPair(std::size_t blocks, const RewardConfig& config, std::uint64_t seed);

    std::size_t blocks() const noexcept { return blocks_; }

    /// ||sigma1(a) - sigma2(a)||^2, optionally divided by the running std.
    double bonus(const ConnectionScheme& a) const;
    double raw_bonus(const ConnectionScheme& a) const;

    /// One plain SGD step on the squared error at a; returns the pre-step loss.
    double train_step(const ConnectionScheme& a);
    void set_learning_rate(double lr) { learning_rate_ = lr; }

    /// Gradient of raw_bonus w.r.t. predictor parameters, flattened.
    std::vector<double> predictor_gradient(const ConnectionScheme& a);
    std::vector<Parameter*> predictor_parameters() { return predictor_.parameters(); }
    std::vector<double> target_snapshot() const;

    /// Makes sigma2 reproduce sigma1 exactly: the first hidden units copy
    /// the target, the rest are silenced on the output side.
    void copy_target_into_predictor();

    /// Feeds the running-std normaliser.
    void observe(double raw);

private:
    std::size_t blocks_;
    double learning_rate_;
    bool normalize_;
    SmallMlp target_;
    SmallMlp predictor_;
    // Welford accumulators
    std::size_t seen_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace ean
