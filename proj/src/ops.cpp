#include "ean/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace ean {

namespace {

std::size_t conv_out_extent(std::size_t in, int k, int stride, int pad) {
    const long span = static_cast<long>(in) + 2L * pad - k;
    if (span < 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
    return static_cast<std::size_t>(span / stride + 1);
}

// Output positions [lo, hi) whose tap at kernel offset `kofs` lands inside
// an input axis of length `in`.
std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t in, int kofs, int stride, int pad) {
    const long shift = static_cast<long>(kofs) - pad;
    long lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
    long hi = (static_cast<long>(in) - 1 - shift);
    hi = hi < 0 ? 0 : hi / stride + 1;
    hi = std::min<long>(hi, static_cast<long>(out));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void check_conv_args(const Tensor& input, const Tensor& kernel, int stride, int pad) {
    if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W], got " + shape_string(input.shape()));
    if (kernel.rank() != 4) throw std::invalid_argument("conv2d: kernel must be [C_out,C_in,k,k], got " + shape_string(kernel.shape()));
    if (kernel.dim(1) != input.dim(0)) {
        throw std::invalid_argument("conv2d: input " + shape_string(input.shape()) + " has " +
                                    std::to_string(input.dim(0)) + " channels but kernel " +
                                    shape_string(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)));
    }
    if (kernel.dim(2) != kernel.dim(3) || kernel.dim(2) % 2 == 0) {
        throw std::invalid_argument("conv2d: kernel must be square with odd size, got " + shape_string(kernel.shape()));
    }
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
    check_conv_args(input, kernel, stride, pad);
    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = kernel.dim(0);
    const int k = static_cast<int>(kernel.dim(2));
    const std::size_t ho = conv_out_extent(h, k, stride, pad), wo = conv_out_extent(w, k, stride, pad);

    Tensor out({cout, ho, wo});
    const double* in = input.data().data();
    const double* ker = kernel.data().data();
    double* o = out.data().data();
    for (std::size_t co = 0; co < cout; ++co) {
        double* oc = o + co * ho * wo;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* ic = in + ci * h * w;
            for (int kh = 0; kh < k; ++kh) {
                const auto [y0, y1] = valid_range(ho, h, kh, stride, pad);
                for (int kw = 0; kw < k; ++kw) {
                    const auto [x0, x1] = valid_range(wo, w, kw, stride, pad);
                    const double kv = ker[((co * cin + ci) * k + kh) * k + kw];
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        const double* irow = ic + (oy * stride + kh - pad) * w + (x0 * stride + kw - pad);
                        double* orow = oc + oy * wo;
                        for (std::size_t ox = x0; ox < x1; ++ox, irow += stride) orow[ox] += kv * *irow;
                    }
                }
            }
        }
    }
    return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out, int stride, int pad,
                     Tensor* grad_input, Tensor& grad_kernel) {
    check_conv_args(input, kernel, stride, pad);
    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = kernel.dim(0);
    const int k = static_cast<int>(kernel.dim(2));
    const std::size_t ho = grad_out.dim(1), wo = grad_out.dim(2);
    if (grad_kernel.shape() != kernel.shape()) throw std::invalid_argument("conv2d_backward: grad_kernel shape mismatch");

    if (grad_input) {
        if (grad_input->shape() != input.shape()) *grad_input = Tensor(input.shape());
        else grad_input->fill(0.0);
    }
    const double* in = input.data().data();
    const double* ker = kernel.data().data();
    const double* go = grad_out.data().data();
    double* gk = grad_kernel.data().data();
    double* gi = grad_input ? grad_input->data().data() : nullptr;

    for (std::size_t co = 0; co < cout; ++co) {
        const double* goc = go + co * ho * wo;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* ic = in + ci * h * w;
            double* gic = gi ? gi + ci * h * w : nullptr;
            for (int kh = 0; kh < k; ++kh) {
                const auto [y0, y1] = valid_range(ho, h, kh, stride, pad);
                for (int kw = 0; kw < k; ++kw) {
                    const auto [x0, x1] = valid_range(wo, w, kw, stride, pad);
                    const std::size_t kidx = ((co * cin + ci) * k + kh) * k + kw;
                    const double kv = ker[kidx];
                    double acc = 0.0;
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        const std::size_t off = (oy * stride + kh - pad) * w + (x0 * stride + kw - pad);
                        const double* irow = ic + off;
                        const double* grow = goc + oy * wo;
                        if (gic) {
                            double* girow = gic + off;
                            for (std::size_t ox = x0; ox < x1; ++ox, irow += stride, girow += stride) {
                                acc += grow[ox] * *irow;
                                *girow += kv * grow[ox];
                            }
                        } else {
                            for (std::size_t ox = x0; ox < x1; ++ox, irow += stride) acc += grow[ox] * *irow;
                        }
                    }
                    gk[kidx] += acc;
                }
            }
        }
    }
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.rank() != 1 || weight.rank() != 2 || bias.rank() != 1 || weight.dim(1) != input.dim(0) ||
        weight.dim(0) != bias.dim(0)) {
        throw std::invalid_argument("dense: nonconforming shapes input " + shape_string(input.shape()) + ", weight " +
                                    shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
    }
    const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
    Tensor out({out_n});
    for (std::size_t i = 0; i < out_n; ++i) {
        double s = bias[i];
        for (std::size_t j = 0; j < in_n; ++j) s += weight[i * in_n + j] * input[j];
        out[i] = s;
    }
    return out;
}

void dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out, Tensor* grad_input,
                    Tensor& grad_weight, Tensor& grad_bias) {
    const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
    if (grad_out.size() != out_n || input.size() != in_n) throw std::invalid_argument("dense_backward: shape mismatch");
    if (grad_input) *grad_input = Tensor({in_n});
    for (std::size_t i = 0; i < out_n; ++i) {
        const double g = grad_out[i];
        grad_bias[i] += g;
        for (std::size_t j = 0; j < in_n; ++j) {
            grad_weight[i * in_n + j] += g * input[j];
            if (grad_input) (*grad_input)[j] += weight[i * in_n + j] * g;
        }
    }
}

Tensor global_avg_pool(const Tensor& input) {
    if (input.rank() != 3 || input.dim(1) == 0 || input.dim(2) == 0) {
        throw std::invalid_argument("global_avg_pool: expected nonempty [C,H,W], got " + shape_string(input.shape()));
    }
    const std::size_t c = input.dim(0), hw = input.dim(1) * input.dim(2);
    Tensor out({c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += input[ch * hw + i];
        out[ch] = s / static_cast<double>(hw);
    }
    return out;
}

Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out) {
    Tensor g(input_shape);
    const std::size_t c = input_shape[0], hw = input_shape[1] * input_shape[2];
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = grad_out[ch] / static_cast<double>(hw);
        for (std::size_t i = 0; i < hw; ++i) g[ch * hw + i] = v;
    }
    return g;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& pre_activation, const Tensor& grad_out) {
    Tensor g(pre_activation.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = pre_activation[i] > 0.0 ? grad_out[i] : 0.0;
    return g;
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
    return y;
}

LossAndGrad softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    const std::size_t k = logits.size();
    if (label >= k) {
        throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) + " out of range for " +
                                    std::to_string(k) + " classes");
    }
    const auto top = static_cast<std::size_t>(std::max_element(logits.data().begin(), logits.data().end()) -
                                              logits.data().begin());
    const double mx = logits[top];
    // log(sum) = log1p(sum over the non-max terms); keeps tiny losses exact
    double rest = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (i != top) rest += std::exp(logits[i] - mx);
    }
    const double log_denom = std::log1p(rest);
    LossAndGrad r{log_denom + (mx - logits[label]), Tensor({k})};
    for (std::size_t i = 0; i < k; ++i) r.grad_logits[i] = std::exp(logits[i] - mx - log_denom);
    r.grad_logits[label] -= 1.0;
    return r;
}

std::size_t argmax(const Tensor& logits) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return best;
}

GradCheckResult grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                           const std::function<void()>& backward, double epsilon, double abs_floor) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("grad_check: epsilon must be > 0");
    backward();
    GradCheckResult result;
    for (Parameter* p : params) {
        const Tensor analytic = p->grad;
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + epsilon;
            const double up = loss();
            p->value[i] = saved - epsilon;
            const double down = loss();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double a = analytic[i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), abs_floor});
            result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
            result.max_relative_error = std::max(result.max_relative_error, rel);
            ++result.checked;
        }
    }
    return result;
}

}  // namespace ean
