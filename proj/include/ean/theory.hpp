#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "ean/scheme.hpp"

namespace ean {

/// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
/// Series below x = a + 1, Lentz continued fraction above.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

/// P{chi2(dof) >= threshold^2}.
double chi_square_tail(double dof, double threshold);
/// P{chi2(dof) < threshold^2}, computed directly so tails near 1 keep precision.
double chi_square_head(double dof, double threshold);

/// Degrees of freedom used for the squared row norm m * ||W1_s||^2.
/// The proof writes d - 1; a row of d Gaussians gives d.
enum class DofConvention { Literal, Corrected };

int thm1_dof(int d, DofConvention convention);

/// Smallest integer m with m > ln(delta) / ln(P(dof, epsilon)).
std::size_t thm1_width_bound(int d, double epsilon, double delta, DofConvention convention);

/// Two-layer net x -> W2 relu(W1 x) with W1 ~ N(0, 1/m), W2 in {-1, +1}.
struct Thm1Instance {
    int d = 0;
    std::size_t m = 0;
    std::vector<double> w1;  // [m, d]
    std::vector<double> w2;  // [m]
    std::vector<std::vector<double>> probes;  // ||x|| <= 1
};

Thm1Instance make_thm1_instance(int d, std::size_t m, std::size_t probes, std::mt19937_64& rng);

/// W2 relu(B W1 x) where B zeroes row `zero_row` (pass m for no zeroing).
double thm1_output(const Thm1Instance& inst, const std::vector<double>& x, std::size_t zero_row);

struct ZeroingResult {
    std::size_t row = 0;        // argmin_s ||W1_s||
    double min_row_norm = 0.0;
    double error = 0.0;         // max over probes of the output change
    double bound = 0.0;         // sqrt(m) * ||W1_j||
};

ZeroingResult min_row_zeroing_error(const Thm1Instance& inst);

struct Thm1Report {
    int d = 0;
    double epsilon = 0.0;
    double delta = 0.0;
    DofConvention convention = DofConvention::Corrected;
    std::size_t m = 0;
    std::size_t trials = 0;
    std::size_t failures = 0;
    double failure_rate = 0.0;
    double band = 0.0;  // delta + 3 sigma of Binomial(trials, delta) / trials
    std::size_t zeroing_violations = 0;  // instances whose error exceeds the proof bound
    bool pass = false;
};

/// Failure means min_s ||W1_s|| >= epsilon / sqrt(m). Squared row norms are
/// drawn as chi2(d) / m; only the argmin row is realised as a vector (uniform
/// direction times its norm) for the zeroing-error check. m = 0 selects
/// thm1_width_bound under `convention`.
Thm1Report thm1_monte_carlo(int d, double epsilon, double delta, std::size_t trials, std::uint64_t seed,
                            DofConvention convention, std::size_t m = 0, std::size_t probes = 16,
                            std::size_t workers = 1);

/// Residual layer x <- x + V relu(U x + b).
struct ResidualLayer {
    std::size_t width = 0;
    std::vector<double> u;  // [width, dim]
    std::vector<double> b;  // [width]
    std::vector<double> v;  // [dim, width]
    bool added = false;     // appended by extend_network
};

struct ResNetChain {
    std::size_t dim = 0;
    std::vector<ResidualLayer> layers;

    std::size_t depth() const noexcept { return layers.size(); }
    std::size_t max_width() const noexcept;
    std::vector<double> forward(const std::vector<double>& x) const;
    /// Hidden units with mask bit 0 are silenced. The mask covers every
    /// layer's units in order.
    std::vector<double> forward_masked(const std::vector<double>& x, const ConnectionScheme& mask) const;
    std::size_t unit_count() const noexcept;

    /// Gradient of sum_k c_k f_k(x) with respect to every parameter, layer by
    /// layer in (u, b, v) order.
    std::vector<double> gradient(const std::vector<double>& x, const std::vector<double>& c) const;
    std::vector<double*> parameter_pointers();
};

ResNetChain make_random_chain(std::size_t dim, const std::vector<std::size_t>& widths, double scale,
                              std::mt19937_64& rng);

/// Appends zero-parameter residual layers; the function is unchanged.
ResNetChain extend_network(const ResNetChain& g, int extra_layers);

struct Embedding {
    ResNetChain wide;
    ConnectionScheme mask;  // 1 on the narrow network's units
};

/// Every layer widened to wide_width; the narrow units are copied, the new
/// ones drawn at random and masked off.
Embedding embed_as_subnetwork(const ResNetChain& narrow, std::size_t wide_width, std::mt19937_64& rng);

}  // namespace ean
