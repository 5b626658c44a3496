#include "ean/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ean {

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_volume(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_volume(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_volume(shape_)) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_string(shape_));
    }
    if (!all_finite()) {
        throw std::invalid_argument("tensor data contains NaN or Inf");
    }
}

Tensor Tensor::filled(Shape shape, double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("tensor fill value must be finite");
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
    }
    return shape_[axis];
}

void Tensor::fill(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("tensor fill value must be finite");
    std::fill(data_.begin(), data_.end(), value);
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::abs_sum() const noexcept {
    double s = 0.0;
    for (double v : data_) s += std::abs(v);
    return s;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (other.shape_ != shape_) {
        throw std::invalid_argument("tensor add: shape " + shape_string(shape_) + " vs " + shape_string(other.shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double scale) noexcept {
    for (double& v : data_) v *= scale;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) {
    a += b;
    return a;
}

Tensor operator*(double scale, Tensor a) {
    a *= scale;
    return a;
}

Parameter::Parameter(std::string n, Tensor init)
    : name(std::move(n)), value(std::move(init)), grad(value.shape()), momentum(value.shape()) {}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
}

void sgd_momentum_step(std::span<Parameter* const> params, const OptimizerConfig& config) {
    for (Parameter* p : params) {
        auto value = p->value.data();
        auto grad = p->grad.data();
        auto buf = p->momentum.data();
        for (std::size_t i = 0; i < value.size(); ++i) {
            buf[i] = config.momentum * buf[i] + (grad[i] + config.weight_decay * value[i]);
            value[i] -= config.learning_rate * buf[i];
        }
        p->zero_grad();
    }
}

}  // namespace ean
