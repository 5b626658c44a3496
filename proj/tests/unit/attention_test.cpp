#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ean/attention.hpp"
#include "ean/ops.hpp"

using namespace ean;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> n(0.0, scale);
    for (auto& v : t.data()) v = n(rng);
    return t;
}

void randomize(SEParams& p, std::mt19937_64& rng) {
    for (Parameter* q : p.parameters()) q->value = random_tensor(q->value.shape(), rng, 0.7);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// SE written out straight from the formulas, no shared helpers
std::vector<double> se_reference(const Tensor& x, const SEParams& p) {
    const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2), h = p.hidden();
    std::vector<double> pooled(c), hidden(h), mask(c);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < hw; ++j) pooled[i] += x[i * hw + j];
        pooled[i] /= double(hw);
    }
    for (std::size_t k = 0; k < h; ++k) {
        double s = p.b1.value[k];
        for (std::size_t i = 0; i < c; ++i) s += p.w1.value[k * c + i] * pooled[i];
        hidden[k] = s > 0 ? s : 0.0;
    }
    for (std::size_t i = 0; i < c; ++i) {
        double s = p.b2.value[i];
        for (std::size_t k = 0; k < h; ++k) s += p.w2.value[i * h + k] * hidden[k];
        mask[i] = logistic(s);
    }
    return mask;
}

}  // namespace

TEST(SeAttention, ZeroParamsGiveHalf) {
    std::mt19937_64 rng(1);
    const Tensor m = se_attention(random_tensor({8, 3, 3}, rng), SEParams::zeros(8, 4));
    ASSERT_EQ(m.size(), 8u);
    for (double v : m.values()) EXPECT_EQ(v, 0.5);
}

TEST(SeAttention, InvariantUnderPixelPermutation) {
    std::mt19937_64 rng(2);
    SEParams p = SEParams::zeros(4, 2);
    randomize(p, rng);
    const Tensor x = random_tensor({4, 3, 3}, rng);
    Tensor y(x.shape());
    std::vector<std::size_t> perm{8, 3, 0, 5, 1, 7, 2, 6, 4};
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t i = 0; i < 9; ++i) y[c * 9 + i] = x[c * 9 + perm[i]];
    const Tensor a = se_attention(x, p), b = se_attention(y, p);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a[c], b[c], 1e-15);
}

TEST(SeAttention, MatchesDirectFormula) {
    std::mt19937_64 rng(3);
    SEParams p = SEParams::zeros(8, 4);
    randomize(p, rng);
    const Tensor x = random_tensor({8, 4, 4}, rng);
    const Tensor m = se_attention(x, p);
    const auto ref = se_reference(x, p);
    for (std::size_t c = 0; c < 8; ++c) {
        EXPECT_NEAR(m[c], ref[c], 1e-12);
        EXPECT_GT(m[c], 0.0);
        EXPECT_LT(m[c], 1.0);
    }
}

TEST(SeAttention, ChannelMismatch) {
    EXPECT_THROW(se_attention(Tensor::zeros({6, 2, 2}), SEParams::zeros(8, 4)), std::invalid_argument);
    EXPECT_THROW(SEParams::zeros(3, 4), std::invalid_argument);
}

TEST(SeParams, CountMatchesAllocation) {
    for (std::size_t c : {4u, 8u, 16u, 9u})
        for (int r : {1, 2, 4}) {
            const SEParams p = SEParams::zeros(c, r);
            std::size_t allocated = 0;
            for (const Parameter* q : p.parameters()) allocated += q->size();
            EXPECT_EQ(allocated, SEParams::count(c, r));
            EXPECT_EQ(sam_param_count(SamParams{p}), allocated);
        }
    EXPECT_EQ(SEParams::count(8, 4), 42u);
}

TEST(SeAttention, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    SEParams p = SEParams::zeros(8, 4);
    randomize(p, rng);
    Parameter x("x", random_tensor({8, 3, 3}, rng));
    const Tensor residual = random_tensor({8, 3, 3}, rng), c = random_tensor({8, 3, 3}, rng);
    // loss = <c, x + mask(x) * residual>, an SE-recalibrated residual connection
    auto loss = [&] {
        const Tensor y = recalibrate(x.value, residual, se_attention(x.value, p), true);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
        return s;
    };
    auto backward = [&] {
        for (Parameter* q : p.parameters()) q->zero_grad();
        x.zero_grad();
        SECache cache;
        const Tensor mask = se_forward(x.value, p, cache);
        Tensor gres, gmask;
        recalibrate_backward(residual, mask, c, gres, gmask);
        x.grad = c;
        se_backward(x.value, p, cache, gmask, x.grad);
    };
    std::vector<Parameter*> ps = p.parameters();
    ps.push_back(&x);
    EXPECT_LT(grad_check(ps, loss, backward, 1e-6).max_relative_error, 1e-4);
}

TEST(SgeAttention, ConstantInputGivesSigmoidBeta) {
    SGEParams p = SGEParams::init(4, 2);
    p.gamma.value[0] = 3.0;
    p.gamma.value[1] = -2.0;
    p.beta.value[0] = 0.4;
    p.beta.value[1] = -1.1;
    const Tensor m = sge_attention(Tensor::filled({4, 3, 3}, 0.7), p);
    for (std::size_t i = 0; i < 18; ++i) EXPECT_NEAR(m[i], logistic(0.4), 1e-15);
    for (std::size_t i = 18; i < 36; ++i) EXPECT_NEAR(m[i], logistic(-1.1), 1e-15);
}

TEST(SgeAttention, ZeroGammaIgnoresInput) {
    std::mt19937_64 rng(5);
    SGEParams p = SGEParams::init(6, 3);
    for (std::size_t g = 0; g < 3; ++g) p.beta.value[g] = 0.3 * double(g) - 0.2;
    const Tensor m = sge_attention(random_tensor({6, 4, 4}, rng), p);
    for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(m[c * 16 + i], logistic(p.beta.value[c / 2]), 1e-15);
}

TEST(SgeAttention, MatchesDirectFormula) {
    std::mt19937_64 rng(6);
    SGEParams p = SGEParams::init(4, 2);
    p.gamma.value = random_tensor({2}, rng);
    p.beta.value = random_tensor({2}, rng);
    const Tensor x = random_tensor({4, 3, 3}, rng);
    const Tensor m = sge_attention(x, p);
    for (std::size_t g = 0; g < 2; ++g) {
        // group channels 2g, 2g+1
        double gvec[2];
        for (std::size_t k = 0; k < 2; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < 9; ++i) s += x[(2 * g + k) * 9 + i];
            gvec[k] = s / 9.0;
        }
        double imp[9], mu = 0.0;
        for (std::size_t i = 0; i < 9; ++i) {
            imp[i] = gvec[0] * x[(2 * g) * 9 + i] + gvec[1] * x[(2 * g + 1) * 9 + i];
            mu += imp[i] / 9.0;
        }
        double var = 0.0;
        for (double v : imp) var += (v - mu) * (v - mu) / 9.0;
        const double sd = std::sqrt(var);
        for (std::size_t i = 0; i < 9; ++i) {
            const double expect = logistic(p.gamma.value[g] * (imp[i] - mu) / (sd + 1e-5) + p.beta.value[g]);
            EXPECT_NEAR(m[(2 * g) * 9 + i], expect, 1e-12);
            EXPECT_NEAR(m[(2 * g + 1) * 9 + i], expect, 1e-12);
        }
    }
}

TEST(SgeAttention, TooManyGroups) {
    EXPECT_THROW(SGEParams::init(3, 4), std::invalid_argument);
}

TEST(SgeGroups, TrailingRemainderGroup) {
    const auto g = sge_groups(7, 3);
    ASSERT_EQ(g.size(), 4u);
    EXPECT_EQ(g[0].begin, 0u);
    EXPECT_EQ(g[2].end, 6u);
    EXPECT_EQ(g[3].begin, 6u);
    EXPECT_EQ(g[3].end, 7u);
    EXPECT_EQ(SGEParams::count(7, 3), 8u);
    EXPECT_EQ(sge_groups(8, 4).size(), 4u);
}

TEST(SgeAttention, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    SGEParams p = SGEParams::init(5, 2);
    p.gamma.value = random_tensor({p.groups()}, rng);
    p.beta.value = random_tensor({p.groups()}, rng);
    Parameter x("x", random_tensor({5, 3, 3}, rng));
    const Tensor residual = random_tensor({5, 3, 3}, rng), c = random_tensor({5, 3, 3}, rng);
    auto loss = [&] {
        const Tensor y = recalibrate(x.value, residual, sge_attention(x.value, p), true);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
        return s;
    };
    auto backward = [&] {
        p.gamma.zero_grad();
        p.beta.zero_grad();
        SGECache cache;
        const Tensor mask = sge_forward(x.value, p, cache);
        Tensor gres, gmask;
        recalibrate_backward(residual, mask, c, gres, gmask);
        x.grad = c;
        sge_backward(x.value, p, cache, gmask, x.grad);
    };
    std::vector<Parameter*> ps{&p.gamma, &p.beta, &x};
    EXPECT_LT(grad_check(ps, loss, backward, 1e-6).max_relative_error, 1e-4);
}

TEST(Recalibrate, MaskOnesIsPlainResidual) {
    std::mt19937_64 rng(8);
    const Tensor x = random_tensor({3, 2, 2}, rng), r = random_tensor({3, 2, 2}, rng);
    EXPECT_EQ(recalibrate(x, r, Tensor::filled({3}, 1.0), true), x + r);
    EXPECT_EQ(recalibrate(x, r, Tensor::filled({3, 2, 2}, 1.0), true), x + r);
}

TEST(Recalibrate, MaskZerosSuppressesResidual) {
    std::mt19937_64 rng(9);
    const Tensor x = random_tensor({3, 2, 2}, rng), r = random_tensor({3, 2, 2}, rng);
    EXPECT_EQ(recalibrate(x, r, Tensor::zeros({3}), true), x);
}

TEST(Recalibrate, DisconnectedIgnoresMask) {
    std::mt19937_64 rng(10);
    const Tensor x = random_tensor({3, 2, 2}, rng), r = random_tensor({3, 2, 2}, rng);
    EXPECT_EQ(recalibrate(x, r, random_tensor({3}, rng), false), x + r);
    EXPECT_THROW(recalibrate(x, r, Tensor::zeros({2}), true), std::invalid_argument);
}
