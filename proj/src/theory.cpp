#include "ean/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ean/rng.hpp"
#include "ean/search.hpp"

namespace ean {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

double gamma_series(double a, double x) {
    // P(a, x) = x^a e^-x / Gamma(a+1) * sum x^n / ((a+1)...(a+n))
    double ap = a, term = 1.0 / a, sum = term;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_fraction(double a, double x) {
    // modified Lentz for Q(a, x)
    double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_gamma_args(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("incomplete gamma needs a > 0");
    if (!(x >= 0.0)) throw std::invalid_argument("incomplete gamma needs x >= 0");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    check_gamma_args(a, x);
    if (x == 0.0) return 0.0;
    return x < a + 1.0 ? gamma_series(a, x) : 1.0 - gamma_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
    check_gamma_args(a, x);
    if (x == 0.0) return 1.0;
    return x < a + 1.0 ? 1.0 - gamma_series(a, x) : gamma_fraction(a, x);
}

namespace {

void check_chi_args(double dof, double threshold) {
    if (!(dof >= 1.0)) throw std::invalid_argument("chi-square tail needs dof >= 1, got " + std::to_string(dof));
    if (!(threshold > 0.0)) throw std::invalid_argument("chi-square threshold must be > 0");
}

}  // namespace

double chi_square_tail(double dof, double threshold) {
    check_chi_args(dof, threshold);
    return regularized_gamma_q(dof / 2.0, threshold * threshold / 2.0);
}

double chi_square_head(double dof, double threshold) {
    check_chi_args(dof, threshold);
    return regularized_gamma_p(dof / 2.0, threshold * threshold / 2.0);
}

int thm1_dof(int d, DofConvention convention) { return convention == DofConvention::Literal ? d - 1 : d; }

std::size_t thm1_width_bound(int d, double epsilon, double delta, DofConvention convention) {
    if (d < 2) throw std::invalid_argument("width bound needs d >= 2");
    if (!(epsilon > 0.0)) throw std::invalid_argument("width bound needs epsilon > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("width bound needs 0 < delta < 1");
    const double head = chi_square_head(thm1_dof(d, convention), epsilon);
    // ln P with P = 1 - head
    const double log_p = head < 0.5 ? std::log1p(-head) : std::log(chi_square_tail(thm1_dof(d, convention), epsilon));
    if (log_p == 0.0) throw std::domain_error("chi-square tail is 1 to double precision; the width bound is unbounded");
    if (!std::isfinite(log_p)) return 1;  // P = 0: any width works
    const double ratio = std::log(delta) / log_p;
    if (ratio > 1e15) throw std::domain_error("width bound exceeds representable range");
    return static_cast<std::size_t>(std::floor(ratio)) + 1;
}

Thm1Instance make_thm1_instance(int d, std::size_t m, std::size_t probes, std::mt19937_64& rng) {
    if (d < 1 || m < 1) throw std::invalid_argument("instance needs d >= 1 and m >= 1");
    Thm1Instance inst;
    inst.d = d;
    inst.m = m;
    std::normal_distribution<double> g(0.0, 1.0);
    const double sd = std::sqrt(1.0 / static_cast<double>(m));
    inst.w1.resize(m * static_cast<std::size_t>(d));
    for (auto& v : inst.w1) v = sd * g(rng);
    std::bernoulli_distribution coin(0.5);
    inst.w2.resize(m);
    for (auto& v : inst.w2) v = coin(rng) ? 1.0 : -1.0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t p = 0; p < probes; ++p) {
        std::vector<double> x(static_cast<std::size_t>(d));
        double n2 = 0.0;
        for (auto& v : x) {
            v = g(rng);
            n2 += v * v;
        }
        // uniform in the unit ball
        const double r = std::pow(u(rng), 1.0 / d) / std::sqrt(n2);
        for (auto& v : x) v *= r;
        inst.probes.push_back(std::move(x));
    }
    return inst;
}

double thm1_output(const Thm1Instance& inst, const std::vector<double>& x, std::size_t zero_row) {
    const auto d = static_cast<std::size_t>(inst.d);
    if (x.size() != d) throw std::invalid_argument("probe dimension mismatch");
    double out = 0.0;
    for (std::size_t s = 0; s < inst.m; ++s) {
        if (s == zero_row) continue;
        double z = 0.0;
        for (std::size_t k = 0; k < d; ++k) z += inst.w1[s * d + k] * x[k];
        out += inst.w2[s] * std::max(z, 0.0);
    }
    return out;
}

ZeroingResult min_row_zeroing_error(const Thm1Instance& inst) {
    if (inst.probes.empty()) throw std::invalid_argument("zeroing error needs at least one probe");
    const auto d = static_cast<std::size_t>(inst.d);
    ZeroingResult r;
    r.min_row_norm = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < inst.m; ++s) {
        double n2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) n2 += inst.w1[s * d + k] * inst.w1[s * d + k];
        const double n = std::sqrt(n2);
        if (n < r.min_row_norm) {
            r.min_row_norm = n;
            r.row = s;
        }
    }
    for (const auto& x : inst.probes) {
        const double full = thm1_output(inst, x, inst.m);
        const double zeroed = thm1_output(inst, x, r.row);
        r.error = std::max(r.error, std::abs(full - zeroed));
    }
    r.bound = std::sqrt(static_cast<double>(inst.m)) * r.min_row_norm;
    return r;
}

Thm1Report thm1_monte_carlo(int d, double epsilon, double delta, std::size_t trials, std::uint64_t seed,
                            DofConvention convention, std::size_t m, std::size_t probes, std::size_t workers) {
    if (trials < 100) throw std::invalid_argument("Monte-Carlo check needs at least 100 trials");
    if (probes == 0) throw std::invalid_argument("Monte-Carlo check needs at least one probe");
    Thm1Report rep;
    rep.d = d;
    rep.epsilon = epsilon;
    rep.delta = delta;
    rep.convention = convention;
    rep.trials = trials;
    rep.m = m ? m : thm1_width_bound(d, epsilon, delta, convention);
    const double mm = static_cast<double>(rep.m);
    const double threshold = epsilon / std::sqrt(mm);

    std::vector<std::uint8_t> failed(trials, 0), violated(trials, 0);
    parallel_for(trials, workers, [&](std::size_t t) {
        std::mt19937_64 rng(substream_seed(seed, t));
        std::chi_squared_distribution<double> chi(static_cast<double>(d));
        double min_n2 = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < rep.m; ++s) min_n2 = std::min(min_n2, chi(rng) / mm);
        const double min_norm = std::sqrt(min_n2);
        failed[t] = min_norm >= threshold;

        // realise the argmin row and check the proof inequality on probes
        Thm1Instance inst;
        inst.d = d;
        inst.m = 1;
        std::normal_distribution<double> g(0.0, 1.0);
        inst.w1.resize(static_cast<std::size_t>(d));
        double n2 = 0.0;
        for (auto& v : inst.w1) {
            v = g(rng);
            n2 += v * v;
        }
        for (auto& v : inst.w1) v *= min_norm / std::sqrt(n2);
        inst.w2 = {std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0};
        const Thm1Instance probe_src = make_thm1_instance(d, 1, probes, rng);
        inst.probes = probe_src.probes;
        double err = 0.0;
        for (const auto& x : inst.probes) err = std::max(err, std::abs(thm1_output(inst, x, 1) - thm1_output(inst, x, 0)));
        violated[t] = err > std::sqrt(mm) * min_norm;
    });
    for (std::size_t t = 0; t < trials; ++t) {
        rep.failures += failed[t];
        rep.zeroing_violations += violated[t];
    }
    rep.failure_rate = static_cast<double>(rep.failures) / static_cast<double>(trials);
    rep.band = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
    rep.pass = rep.failure_rate <= rep.band && rep.zeroing_violations == 0;
    return rep;
}

std::size_t ResNetChain::max_width() const noexcept {
    std::size_t w = 0;
    for (const auto& l : layers) w = std::max(w, l.width);
    return w;
}

std::size_t ResNetChain::unit_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.width;
    return n;
}

std::vector<double> ResNetChain::forward(const std::vector<double>& x) const {
    return forward_masked(x, ConnectionScheme::ones(unit_count()));
}

std::vector<double> ResNetChain::forward_masked(const std::vector<double>& x, const ConnectionScheme& mask) const {
    if (x.size() != dim) throw std::invalid_argument("chain input dimension mismatch");
    if (mask.size() != unit_count()) throw std::invalid_argument("mask must cover every hidden unit");
    std::vector<double> h = x;
    std::size_t unit = 0;
    for (const auto& l : layers) {
        std::vector<double> a(l.width);
        for (std::size_t j = 0; j < l.width; ++j) {
            double z = l.b[j];
            for (std::size_t k = 0; k < dim; ++k) z += l.u[j * dim + k] * h[k];
            a[j] = mask[unit + j] ? std::max(z, 0.0) : 0.0;
        }
        for (std::size_t k = 0; k < dim; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < l.width; ++j) s += l.v[k * l.width + j] * a[j];
            h[k] += s;
        }
        unit += l.width;
    }
    return h;
}

std::vector<double> ResNetChain::gradient(const std::vector<double>& x, const std::vector<double>& c) const {
    if (x.size() != dim || c.size() != dim) throw std::invalid_argument("chain gradient dimension mismatch");
    std::vector<std::vector<double>> inputs, pre;
    std::vector<double> h = x;
    for (const auto& l : layers) {
        inputs.push_back(h);
        std::vector<double> z(l.width);
        for (std::size_t j = 0; j < l.width; ++j) {
            z[j] = l.b[j];
            for (std::size_t k = 0; k < dim; ++k) z[j] += l.u[j * dim + k] * h[k];
        }
        for (std::size_t k = 0; k < dim; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < l.width; ++j) s += l.v[k * l.width + j] * std::max(z[j], 0.0);
            h[k] += s;
        }
        pre.push_back(std::move(z));
    }
    std::vector<std::vector<double>> per_layer(layers.size());
    std::vector<double> g = c;  // dL/dh
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& l = layers[li];
        const auto& z = pre[li];
        const auto& in = inputs[li];
        std::vector<double> gu(l.width * dim, 0.0), gb(l.width, 0.0), gv(dim * l.width, 0.0);
        std::vector<double> ga(l.width, 0.0);
        for (std::size_t k = 0; k < dim; ++k) {
            for (std::size_t j = 0; j < l.width; ++j) {
                gv[k * l.width + j] = g[k] * std::max(z[j], 0.0);
                ga[j] += l.v[k * l.width + j] * g[k];
            }
        }
        std::vector<double> gin = g;  // skip path
        for (std::size_t j = 0; j < l.width; ++j) {
            const double dz = z[j] > 0.0 ? ga[j] : 0.0;
            gb[j] = dz;
            for (std::size_t k = 0; k < dim; ++k) {
                gu[j * dim + k] = dz * in[k];
                gin[k] += l.u[j * dim + k] * dz;
            }
        }
        auto& out = per_layer[li];
        out.insert(out.end(), gu.begin(), gu.end());
        out.insert(out.end(), gb.begin(), gb.end());
        out.insert(out.end(), gv.begin(), gv.end());
        g = std::move(gin);
    }
    std::vector<double> flat;
    for (auto& v : per_layer) flat.insert(flat.end(), v.begin(), v.end());
    return flat;
}

std::vector<double*> ResNetChain::parameter_pointers() {
    std::vector<double*> ptrs;
    for (auto& l : layers) {
        for (auto& v : l.u) ptrs.push_back(&v);
        for (auto& v : l.b) ptrs.push_back(&v);
        for (auto& v : l.v) ptrs.push_back(&v);
    }
    return ptrs;
}

ResNetChain make_random_chain(std::size_t dim, const std::vector<std::size_t>& widths, double scale,
                              std::mt19937_64& rng) {
    if (dim == 0) throw std::invalid_argument("chain dimension must be >= 1");
    std::normal_distribution<double> g(0.0, scale);
    ResNetChain chain;
    chain.dim = dim;
    for (std::size_t w : widths) {
        if (w == 0) throw std::invalid_argument("layer width must be >= 1");
        ResidualLayer l;
        l.width = w;
        l.u.resize(w * dim);
        l.b.resize(w);
        l.v.resize(dim * w);
        for (auto& v : l.u) v = g(rng);
        for (auto& v : l.b) v = g(rng);
        for (auto& v : l.v) v = g(rng);
        chain.layers.push_back(std::move(l));
    }
    return chain;
}

ResNetChain extend_network(const ResNetChain& g, int extra_layers) {
    if (extra_layers < 1) throw std::invalid_argument("extension needs at least one extra layer");
    ResNetChain f = g;
    for (int i = 0; i < extra_layers; ++i) {
        ResidualLayer l;
        l.width = std::max<std::size_t>(1, g.dim);
        l.u.assign(l.width * g.dim, 0.0);
        l.b.assign(l.width, 0.0);
        l.v.assign(g.dim * l.width, 0.0);
        l.added = true;
        f.layers.push_back(std::move(l));
    }
    return f;
}

Embedding embed_as_subnetwork(const ResNetChain& narrow, std::size_t wide_width, std::mt19937_64& rng) {
    if (wide_width <= narrow.max_width()) {
        throw std::invalid_argument("wide width " + std::to_string(wide_width) + " must exceed the narrow width " +
                                    std::to_string(narrow.max_width()));
    }
    const std::size_t dim = narrow.dim;
    std::normal_distribution<double> g(0.0, 1.0);
    Embedding e;
    e.wide.dim = dim;
    std::vector<std::uint8_t> mask;
    for (const auto& l : narrow.layers) {
        ResidualLayer w;
        w.width = wide_width;
        w.added = l.added;
        w.u.resize(wide_width * dim);
        w.b.resize(wide_width);
        w.v.resize(dim * wide_width);
        for (std::size_t j = 0; j < wide_width; ++j) {
            const bool orig = j < l.width;
            for (std::size_t k = 0; k < dim; ++k) w.u[j * dim + k] = orig ? l.u[j * dim + k] : g(rng);
            w.b[j] = orig ? l.b[j] : g(rng);
            for (std::size_t k = 0; k < dim; ++k) w.v[k * wide_width + j] = orig ? l.v[k * l.width + j] : g(rng);
            mask.push_back(orig ? 1 : 0);
        }
        e.wide.layers.push_back(std::move(w));
    }
    e.mask = ConnectionScheme(std::move(mask));
    return e;
}

}  // namespace ean
