#include "ean/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ean/ops.hpp"

namespace ean {

namespace {

Tensor gaussian(Shape shape, double stddev, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

std::size_t se_hidden(std::size_t channels, int reduction) {
    if (reduction < 1) throw std::invalid_argument("SE reduction must be >= 1");
    const std::size_t h = channels / static_cast<std::size_t>(reduction);
    if (h < 1) {
        throw std::invalid_argument("SE hidden width C//r is zero for C=" + std::to_string(channels) +
                                    ", r=" + std::to_string(reduction));
    }
    return h;
}

}  // namespace

SEParams SEParams::zeros(std::size_t channels, int reduction, const std::string& prefix) {
    const std::size_t h = se_hidden(channels, reduction);
    SEParams p;
    p.w1 = Parameter(prefix + ".w1", Tensor({h, channels}));
    p.b1 = Parameter(prefix + ".b1", Tensor({h}));
    p.w2 = Parameter(prefix + ".w2", Tensor({channels, h}));
    p.b2 = Parameter(prefix + ".b2", Tensor({channels}));
    p.reduction = reduction;
    return p;
}

SEParams SEParams::he_init(std::size_t channels, int reduction, std::mt19937_64& rng, const std::string& prefix) {
    SEParams p = zeros(channels, reduction, prefix);
    const std::size_t h = p.hidden();
    p.w1.value = gaussian({h, channels}, std::sqrt(2.0 / static_cast<double>(channels)), rng);
    p.w2.value = gaussian({channels, h}, std::sqrt(2.0 / static_cast<double>(h)), rng);
    return p;
}

std::vector<Parameter*> SEParams::parameters() { return {&w1, &b1, &w2, &b2}; }
std::vector<const Parameter*> SEParams::parameters() const { return {&w1, &b1, &w2, &b2}; }

std::size_t SEParams::count(std::size_t channels, int reduction) {
    const std::size_t h = se_hidden(channels, reduction);
    return channels * h * 2 + h + channels;
}

SGEParams SGEParams::init(std::size_t channels, std::size_t groups, const std::string& prefix) {
    const std::size_t n = sge_groups(channels, groups).size();
    SGEParams p;
    p.gamma = Parameter(prefix + ".gamma", Tensor({n}));
    p.beta = Parameter(prefix + ".beta", Tensor::filled({n}, 1.0));
    p.nominal_groups = groups;
    return p;
}

std::vector<Parameter*> SGEParams::parameters() { return {&gamma, &beta}; }
std::vector<const Parameter*> SGEParams::parameters() const { return {&gamma, &beta}; }

std::size_t SGEParams::count(std::size_t channels, std::size_t groups) {
    return 2 * sge_groups(channels, groups).size();
}

std::vector<ChannelGroup> sge_groups(std::size_t channels, std::size_t groups) {
    if (groups < 1 || groups > channels) {
        throw std::invalid_argument("SGE groups G=" + std::to_string(groups) + " must be in [1, C=" +
                                    std::to_string(channels) + "]");
    }
    const std::size_t per = channels / groups;
    std::vector<ChannelGroup> out;
    for (std::size_t g = 0; g < groups; ++g) out.push_back({g * per, (g + 1) * per});
    if (groups * per < channels) out.push_back({groups * per, channels});
    return out;
}

std::size_t sam_param_count(const SamParams& params) {
    std::size_t n = 0;
    for (const Parameter* p : sam_parameters(params)) n += p->size();
    return n;
}

std::vector<Parameter*> sam_parameters(SamParams& params) {
    return std::visit([](auto& p) { return p.parameters(); }, params);
}

std::vector<const Parameter*> sam_parameters(const SamParams& params) {
    return std::visit([](const auto& p) { return p.parameters(); }, params);
}

Tensor se_attention(const Tensor& x, const SEParams& p) {
    SECache cache;
    return se_forward(x, p, cache);
}

Tensor se_forward(const Tensor& x, const SEParams& p, SECache& cache) {
    if (x.rank() != 3 || x.dim(0) != p.channels()) {
        throw std::invalid_argument("se_attention: input " + shape_string(x.shape()) + " does not match SE channels " +
                                    std::to_string(p.channels()));
    }
    cache.pooled = global_avg_pool(x);
    cache.hidden_pre = dense(cache.pooled, p.w1.value, p.b1.value);
    cache.hidden = relu(cache.hidden_pre);
    cache.mask = sigmoid(dense(cache.hidden, p.w2.value, p.b2.value));
    return cache.mask;
}

void se_backward(const Tensor& x, SEParams& p, const SECache& cache, const Tensor& grad_mask, Tensor& grad_x) {
    Tensor grad_z(cache.mask.shape());
    for (std::size_t c = 0; c < grad_z.size(); ++c) {
        const double s = cache.mask[c];
        grad_z[c] = grad_mask[c] * s * (1.0 - s);
    }
    Tensor grad_hidden;
    dense_backward(cache.hidden, p.w2.value, grad_z, &grad_hidden, p.w2.grad, p.b2.grad);
    const Tensor grad_pre = relu_backward(cache.hidden_pre, grad_hidden);
    Tensor grad_pooled;
    dense_backward(cache.pooled, p.w1.value, grad_pre, &grad_pooled, p.w1.grad, p.b1.grad);
    grad_x += global_avg_pool_backward(x.shape(), grad_pooled);
}

Tensor sge_attention(const Tensor& x, const SGEParams& p) {
    SGECache cache;
    return sge_forward(x, p, cache);
}

Tensor sge_forward(const Tensor& x, const SGEParams& p, SGECache& cache) {
    if (x.rank() != 3) throw std::invalid_argument("sge_attention: expected [C,H,W], got " + shape_string(x.shape()));
    const std::size_t channels = x.dim(0), hw = x.dim(1) * x.dim(2);
    cache.layout = sge_groups(channels, p.nominal_groups);
    if (cache.layout.size() != p.groups()) {
        throw std::invalid_argument("sge_attention: parameters hold " + std::to_string(p.groups()) +
                                    " groups but C=" + std::to_string(channels) + " yields " +
                                    std::to_string(cache.layout.size()));
    }
    cache.groups.assign(cache.layout.size(), {});
    cache.mask = Tensor(x.shape());
    const double n = static_cast<double>(hw);

    for (std::size_t gi = 0; gi < cache.layout.size(); ++gi) {
        const auto [cb, ce] = cache.layout[gi];
        auto& g = cache.groups[gi];
        g.channel_mean.assign(ce - cb, 0.0);
        for (std::size_t c = cb; c < ce; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += x[c * hw + i];
            g.channel_mean[c - cb] = s / n;
        }
        g.importance.assign(hw, 0.0);
        for (std::size_t c = cb; c < ce; ++c) {
            const double m = g.channel_mean[c - cb];
            for (std::size_t i = 0; i < hw; ++i) g.importance[i] += m * x[c * hw + i];
        }
        // shifted by the first value so a constant map has exactly zero spread
        const double shift = g.importance[0];
        double mean = 0.0;
        for (double v : g.importance) mean += v - shift;
        mean = shift + mean / n;
        double var = 0.0;
        for (double v : g.importance) var += (v - mean) * (v - mean);
        var /= n;
        g.mean = mean;
        g.stddev = std::sqrt(var);
        const double gamma = p.gamma.value[gi], beta = p.beta.value[gi];
        g.normalized.resize(hw);
        g.gate.resize(hw);
        for (std::size_t i = 0; i < hw; ++i) {
            g.normalized[i] = (g.importance[i] - mean) / (g.stddev + p.epsilon);
            g.gate[i] = sigmoid(gamma * g.normalized[i] + beta);
        }
        for (std::size_t c = cb; c < ce; ++c) {
            for (std::size_t i = 0; i < hw; ++i) cache.mask[c * hw + i] = g.gate[i];
        }
    }
    return cache.mask;
}

void sge_backward(const Tensor& x, SGEParams& p, const SGECache& cache, const Tensor& grad_mask, Tensor& grad_x) {
    const std::size_t hw = x.dim(1) * x.dim(2);
    const double n = static_cast<double>(hw);
    for (std::size_t gi = 0; gi < cache.layout.size(); ++gi) {
        const auto [cb, ce] = cache.layout[gi];
        const auto& g = cache.groups[gi];
        const double gamma = p.gamma.value[gi];
        const double denom = g.stddev + p.epsilon;

        std::vector<double> grad_norm(hw);
        for (std::size_t i = 0; i < hw; ++i) {
            double gs = 0.0;
            for (std::size_t c = cb; c < ce; ++c) gs += grad_mask[c * hw + i];
            const double s = g.gate[i];
            const double gz = gs * s * (1.0 - s);
            p.gamma.grad[gi] += gz * g.normalized[i];
            p.beta.grad[gi] += gz;
            grad_norm[i] = gamma * gz;
        }

        double mean_gn = 0.0, dot = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            mean_gn += grad_norm[i];
            dot += grad_norm[i] * (g.importance[i] - g.mean);
        }
        mean_gn /= n;
        std::vector<double> grad_imp(hw);
        for (std::size_t i = 0; i < hw; ++i) {
            grad_imp[i] = (grad_norm[i] - mean_gn) / denom;
            if (g.stddev > 0.0) {
                grad_imp[i] -= dot / (denom * denom) * (g.importance[i] - g.mean) / (n * g.stddev);
            }
        }

        for (std::size_t c = cb; c < ce; ++c) {
            const double m = g.channel_mean[c - cb];
            double grad_mean = 0.0;
            for (std::size_t i = 0; i < hw; ++i) {
                grad_x[c * hw + i] += grad_imp[i] * m;
                grad_mean += grad_imp[i] * x[c * hw + i];
            }
            const double spread = grad_mean / n;
            for (std::size_t i = 0; i < hw; ++i) grad_x[c * hw + i] += spread;
        }
    }
}

Tensor recalibrate(const Tensor& x_in, const Tensor& residual, const Tensor& mask, bool connected) {
    if (x_in.shape() != residual.shape()) {
        throw std::invalid_argument("recalibrate: x_in " + shape_string(x_in.shape()) + " vs residual " +
                                    shape_string(residual.shape()));
    }
    Tensor out = x_in;
    if (!connected) {
        out += residual;
        return out;
    }
    if (mask.shape() == residual.shape()) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += mask[i] * residual[i];
        return out;
    }
    if (residual.rank() == 3 && mask.rank() == 1 && mask.dim(0) == residual.dim(0)) {
        const std::size_t hw = residual.dim(1) * residual.dim(2);
        for (std::size_t c = 0; c < mask.size(); ++c) {
            for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] += mask[c] * residual[c * hw + i];
        }
        return out;
    }
    throw std::invalid_argument("recalibrate: mask " + shape_string(mask.shape()) + " does not broadcast to " +
                                shape_string(residual.shape()));
}

void recalibrate_backward(const Tensor& residual, const Tensor& mask, const Tensor& grad_out, Tensor& grad_residual,
                          Tensor& grad_mask) {
    grad_residual = Tensor(residual.shape());
    grad_mask = Tensor(mask.shape());
    if (mask.shape() == residual.shape()) {
        for (std::size_t i = 0; i < residual.size(); ++i) {
            grad_residual[i] = grad_out[i] * mask[i];
            grad_mask[i] = grad_out[i] * residual[i];
        }
        return;
    }
    const std::size_t hw = residual.dim(1) * residual.dim(2);
    for (std::size_t c = 0; c < mask.size(); ++c) {
        double gm = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            grad_residual[c * hw + i] = grad_out[c * hw + i] * mask[c];
            gm += grad_out[c * hw + i] * residual[c * hw + i];
        }
        grad_mask[c] = gm;
    }
}

}  // namespace ean
