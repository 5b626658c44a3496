#include "ean/rewards.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "ean/supernet.hpp"

namespace ean {

void RewardConfig::validate() const {
    for (double l : {lambda1, lambda2, lambda3}) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("reward coefficients must be finite and >= 0");
    }
    if (lambda1 == 0.0 && lambda2 == 0.0 && lambda3 == 0.0) {
        throw std::invalid_argument("at least one reward coefficient must be positive");
    }
    if (!(rnd_learning_rate >= 0.0)) throw std::invalid_argument("RND learning rate must be >= 0");
    if (!(rnd_target_scale > 0.0)) throw std::invalid_argument("RND target scale must be > 0");
    if (rnd_target_hidden == 0 || rnd_predictor_hidden < rnd_target_hidden || rnd_output == 0) {
        throw std::invalid_argument("RND widths must be positive with predictor hidden >= target hidden");
    }
}

double sparsity_reward(const ConnectionScheme& a) {
    if (a.size() == 0) throw std::invalid_argument("sparsity reward of an empty scheme");
    return 1.0 - static_cast<double>(a.ones_count()) / static_cast<double>(a.size());
}

double validation_reward(const Supernet& net, const ConnectionScheme& a, const Dataset& validation) {
    return evaluate_scheme(net, a, validation);
}

double combined_reward(const RewardConfig& config, double g_spa, double g_val, double g_rnd) {
    if (!std::isfinite(g_spa) || !std::isfinite(g_val) || !std::isfinite(g_rnd)) {
        throw std::invalid_argument("reward components must be finite");
    }
    return config.lambda1 * g_spa + config.lambda2 * g_val + config.lambda3 * g_rnd;
}

std::vector<double> SmallMlp::forward(const std::vector<double>& x, std::vector<double>* hidden) const {
    const std::size_t h = w1.value.dim(0), in = w1.value.dim(1), out = w2.value.dim(0);
    std::vector<double> hid(h);
    for (std::size_t j = 0; j < h; ++j) {
        double s = b1.value[j];
        for (std::size_t k = 0; k < in; ++k) s += w1.value[j * in + k] * x[k];
        hid[j] = std::tanh(s);
    }
    std::vector<double> y(out);
    for (std::size_t i = 0; i < out; ++i) {
        double s = b2.value[i];
        for (std::size_t j = 0; j < h; ++j) s += w2.value[i * h + j] * hid[j];
        y[i] = s;
    }
    if (hidden) *hidden = std::move(hid);
    return y;
}

namespace {

SmallMlp make_mlp(std::size_t in, std::size_t hidden, std::size_t out, double scale, std::mt19937_64& rng,
                 const std::string& prefix) {
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor w1({hidden, in}), b1({hidden}), w2({out, hidden}), b2({out});
    const double s1 = scale * std::sqrt(1.0 / static_cast<double>(in));
    const double s2 = scale * std::sqrt(1.0 / static_cast<double>(hidden));
    for (auto& v : w1.data()) v = s1 * g(rng);
    for (auto& v : b1.data()) v = 0.1 * g(rng);
    for (auto& v : w2.data()) v = s2 * g(rng);
    return SmallMlp{Parameter(prefix + ".w1", std::move(w1)), Parameter(prefix + ".b1", std::move(b1)),
                    Parameter(prefix + ".w2", std::move(w2)), Parameter(prefix + ".b2", std::move(b2))};
}

void check_len(const ConnectionScheme& a, std::size_t m) {
    if (a.size() != m) {
        throw std::invalid_argument("RND input has " + std::to_string(a.size()) + " bits, expected " + std::to_string(m));
    }
}

}  // namespace

RNDPair::RNDPair(std::size_t blocks, const RewardConfig& config, std::uint64_t seed)
    : blocks_(blocks), learning_rate_(config.rnd_learning_rate), normalize_(config.normalize_rnd) {
    if (blocks == 0) throw std::invalid_argument("RND pair needs at least one input");
    config.validate();
    std::mt19937_64 rng(seed);
    target_ = make_mlp(blocks, config.rnd_target_hidden, config.rnd_output, config.rnd_target_scale, rng, "rnd.target");
    predictor_ = make_mlp(blocks, config.rnd_predictor_hidden, config.rnd_output, 1.0, rng, "rnd.predictor");
}

double RNDPair::raw_bonus(const ConnectionScheme& a) const {
    check_len(a, blocks_);
    const auto x = a.as_reals();
    const auto t = target_.forward(x);
    const auto y = predictor_.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += (t[i] - y[i]) * (t[i] - y[i]);
    return s;
}

double RNDPair::bonus(const ConnectionScheme& a) const {
    const double raw = raw_bonus(a);
    if (!normalize_ || seen_ < 2) return raw;
    const double sd = std::sqrt(m2_ / static_cast<double>(seen_ - 1));
    return sd > 0.0 ? raw / sd : raw;
}

void RNDPair::observe(double raw) {
    ++seen_;
    const double d = raw - mean_;
    mean_ += d / static_cast<double>(seen_);
    m2_ += d * (raw - mean_);
}

std::vector<double> RNDPair::predictor_gradient(const ConnectionScheme& a) {
    check_len(a, blocks_);
    const auto x = a.as_reals();
    const auto t = target_.forward(x);
    std::vector<double> hid;
    const auto y = predictor_.forward(x, &hid);
    const std::size_t h = hid.size(), out = y.size();

    auto& P = predictor_;
    for (Parameter* p : P.parameters()) p->zero_grad();
    std::vector<double> dh(h, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
        const double g = 2.0 * (y[i] - t[i]);
        P.b2.grad[i] += g;
        for (std::size_t j = 0; j < h; ++j) {
            P.w2.grad[i * h + j] += g * hid[j];
            dh[j] += g * P.w2.value[i * h + j];
        }
    }
    for (std::size_t j = 0; j < h; ++j) {
        const double dz = dh[j] * (1.0 - hid[j] * hid[j]);
        P.b1.grad[j] += dz;
        for (std::size_t k = 0; k < blocks_; ++k) P.w1.grad[j * blocks_ + k] += dz * x[k];
    }
    std::vector<double> flat;
    for (Parameter* p : P.parameters()) flat.insert(flat.end(), p->grad.data().begin(), p->grad.data().end());
    return flat;
}

double RNDPair::train_step(const ConnectionScheme& a) {
    const double loss = raw_bonus(a);
    predictor_gradient(a);
    for (Parameter* p : predictor_.parameters()) {
        for (std::size_t i = 0; i < p->size(); ++i) p->value[i] -= learning_rate_ * p->grad[i];
        p->zero_grad();
    }
    return loss;
}

std::vector<double> RNDPair::target_snapshot() const {
    std::vector<double> out;
    for (const Parameter* p : {&target_.w1, &target_.b1, &target_.w2, &target_.b2}) {
        out.insert(out.end(), p->value.data().begin(), p->value.data().end());
    }
    return out;
}

void RNDPair::copy_target_into_predictor() {
    const std::size_t ht = target_.w1.value.dim(0), hp = predictor_.w1.value.dim(0), out = target_.w2.value.dim(0);
    predictor_.w1.value.fill(0.0);
    predictor_.b1.value.fill(0.0);
    predictor_.w2.value.fill(0.0);
    for (std::size_t j = 0; j < ht; ++j) {
        predictor_.b1.value[j] = target_.b1.value[j];
        for (std::size_t k = 0; k < blocks_; ++k) predictor_.w1.value[j * blocks_ + k] = target_.w1.value[j * blocks_ + k];
    }
    for (std::size_t i = 0; i < out; ++i) {
        for (std::size_t j = 0; j < ht; ++j) predictor_.w2.value[i * hp + j] = target_.w2.value[i * ht + j];
    }
    predictor_.b2.value = target_.b2.value;
}

}  // namespace ean
