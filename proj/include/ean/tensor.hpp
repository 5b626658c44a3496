#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ean {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major tensor of doubles. Entries are checked for finiteness
/// when a tensor is built from external data.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor filled(Shape shape, double value);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // 3-d accessor for [C,H,W] feature maps.
    double& at(std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }
    double at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }

    void fill(double value);
    bool all_finite() const noexcept;
    double abs_sum() const noexcept;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double scale) noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator*(double scale, Tensor a);

/// Learnable tensor with its gradient accumulator and momentum buffer.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor momentum;

    Parameter() = default;
    Parameter(std::string name, Tensor init);

    void zero_grad() noexcept { grad.fill(0.0); }
    std::size_t size() const noexcept { return value.size(); }
};

struct OptimizerConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;

    void validate() const;
};

/// buf <- momentum * buf + (grad + weight_decay * value); value <- value - lr * buf.
/// Gradients are zeroed afterwards.
void sgd_momentum_step(std::span<Parameter* const> params, const OptimizerConfig& config);

}  // namespace ean
