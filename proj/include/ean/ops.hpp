#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "ean/tensor.hpp"

namespace ean {

// Convolution (cross-correlation) over a [C_in,H,W] map with a
// [C_out,C_in,k,k] kernel. k must be odd.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

// Accumulates into grad_kernel; writes grad_input when it is non-null.
void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out, int stride, int pad,
                     Tensor* grad_input, Tensor& grad_kernel);

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Accumulates into grad_weight / grad_bias; writes grad_input when non-null.
void dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out, Tensor* grad_input,
                    Tensor& grad_weight, Tensor& grad_bias);

Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out);

Tensor relu(const Tensor& x);
// Subgradient at 0 is 0.
Tensor relu_backward(const Tensor& pre_activation, const Tensor& grad_out);

double sigmoid(double z) noexcept;
Tensor sigmoid(const Tensor& x);

struct LossAndGrad {
    double loss;
    Tensor grad_logits;
};

LossAndGrad softmax_cross_entropy(const Tensor& logits, std::size_t label);

/// Index of the largest logit, lowest index on ties.
std::size_t argmax(const Tensor& logits);

/// Compares analytic gradients against central finite differences for every
/// scalar of every parameter. `loss` evaluates the model at the current
/// parameter values; `backward` must zero and then populate the gradients.
/// Relative error per entry is |a - n| / max(|a|, |n|, abs_floor).
struct GradCheckResult {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t checked = 0;
};

GradCheckResult grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                           const std::function<void()>& backward, double epsilon, double abs_floor = 1e-6);

}  // namespace ean
