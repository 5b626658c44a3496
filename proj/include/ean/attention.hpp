#pragma once

#include <cstddef>
#include <random>
#include <variant>
#include <vector>

#include "ean/tensor.hpp"

namespace ean {

enum class SamKind { SE, SGE };

/// Squeeze-and-excitation parameters: a C -> C//r -> C fully connected
/// bottleneck over channel means.
struct SEParams {
    Parameter w1;  // [C//r, C]
    Parameter b1;  // [C//r]
    Parameter w2;  // [C, C//r]
    Parameter b2;  // [C]
    int reduction = 4;

    static SEParams zeros(std::size_t channels, int reduction, const std::string& prefix = "se");
    static SEParams he_init(std::size_t channels, int reduction, std::mt19937_64& rng, const std::string& prefix = "se");

    std::size_t channels() const { return b2.value.size(); }
    std::size_t hidden() const { return b1.value.size(); }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    /// C*(C//r)*2 + C//r + C.
    static std::size_t count(std::size_t channels, int reduction);
};

/// Spatial group-wise enhance parameters: one (gamma, beta) pair per group.
struct SGEParams {
    Parameter gamma;  // [G]
    Parameter beta;   // [G]
    std::size_t nominal_groups = 1;
    double epsilon = 1e-5;

    /// gamma = 0, beta = 1 for every group of a C-channel map split G ways.
    static SGEParams init(std::size_t channels, std::size_t groups, const std::string& prefix = "sge");

    std::size_t groups() const { return gamma.value.size(); }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    static std::size_t count(std::size_t channels, std::size_t groups);
};

/// Channel ranges of each SGE group. When C is not divisible by G the
/// trailing channels form a final smaller group.
struct ChannelGroup {
    std::size_t begin;
    std::size_t end;
};
std::vector<ChannelGroup> sge_groups(std::size_t channels, std::size_t groups);

using SamParams = std::variant<SEParams, SGEParams>;

std::size_t sam_param_count(const SamParams& params);
std::vector<Parameter*> sam_parameters(SamParams& params);
std::vector<const Parameter*> sam_parameters(const SamParams& params);

struct SECache {
    Tensor pooled;
    Tensor hidden_pre;
    Tensor hidden;
    Tensor mask;
};

struct SGECache {
    struct Group {
        std::vector<double> channel_mean;
        std::vector<double> importance;   // p_hw
        std::vector<double> normalized;   // p-hat
        std::vector<double> gate;         // sigmoid(gamma * p-hat + beta)
        double mean = 0.0;
        double stddev = 0.0;
    };
    std::vector<ChannelGroup> layout;
    std::vector<Group> groups;
    Tensor mask;
};

/// SE mask in (0,1)^C for a [C,H,W] feature map.
Tensor se_attention(const Tensor& x, const SEParams& p);
Tensor se_forward(const Tensor& x, const SEParams& p, SECache& cache);
/// Accumulates parameter gradients into p and adds dL/dx into grad_x.
void se_backward(const Tensor& x, SEParams& p, const SECache& cache, const Tensor& grad_mask, Tensor& grad_x);

/// SGE mask of shape [C,H,W]; every channel in a group shares the group's gate.
Tensor sge_attention(const Tensor& x, const SGEParams& p);
Tensor sge_forward(const Tensor& x, const SGEParams& p, SGECache& cache);
void sge_backward(const Tensor& x, SGEParams& p, const SGECache& cache, const Tensor& grad_mask, Tensor& grad_x);

/// connected: x_in + mask * residual; otherwise x_in + residual.
/// The mask is either [C] (broadcast over H,W) or the residual's own shape.
Tensor recalibrate(const Tensor& x_in, const Tensor& residual, const Tensor& mask, bool connected);

/// Gradients of recalibrate with respect to residual and mask (x_in's
/// gradient is grad_out itself). grad_mask has the mask's shape.
void recalibrate_backward(const Tensor& residual, const Tensor& mask, const Tensor& grad_out, Tensor& grad_residual,
                          Tensor& grad_mask);

}  // namespace ean
