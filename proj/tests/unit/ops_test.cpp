#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ean/ops.hpp"

using namespace ean;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> n(0.0, scale);
    for (auto& v : t.data()) v = n(rng);
    return t;
}

// six nested loops, zero padding handled by bounds checks
Tensor naive_conv(const Tensor& x, const Tensor& k, int stride, int pad) {
    const long cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = k.dim(0), ks = k.dim(2);
    const long ho = (h + 2 * pad - ks) / stride + 1, wo = (w + 2 * pad - ks) / stride + 1;
    Tensor out({std::size_t(cout), std::size_t(ho), std::size_t(wo)});
    for (long co = 0; co < cout; ++co)
        for (long i = 0; i < ho; ++i)
            for (long j = 0; j < wo; ++j) {
                double s = 0.0;
                for (long ci = 0; ci < cin; ++ci)
                    for (long u = 0; u < ks; ++u)
                        for (long v = 0; v < ks; ++v) {
                            const long r = i * stride + u - pad, c = j * stride + v - pad;
                            if (r < 0 || r >= h || c < 0 || c >= w) continue;
                            s += x.at(ci, r, c) * k[((co * cin + ci) * ks + u) * ks + v];
                        }
                out.at(co, i, j) = s;
            }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
    Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor k({1, 1, 1, 1}, {1.0});
    EXPECT_EQ(conv2d(x, k, 1, 0), x);
}

TEST(Conv2d, ZeroInputGivesZero) {
    std::mt19937_64 rng(1);
    Tensor y = conv2d(Tensor::zeros({2, 5, 5}), random_tensor({3, 2, 3, 3}, rng), 1, 1);
    EXPECT_EQ(y.abs_sum(), 0.0);
}

TEST(Conv2d, MatchesNaiveLoops) {
    std::mt19937_64 rng(2);
    const Tensor x = random_tensor({2, 5, 5}, rng);
    const Tensor k = random_tensor({3, 2, 3, 3}, rng);
    for (int stride : {1, 2})
        for (int pad : {0, 1, 2}) {
            const Tensor y = conv2d(x, k, stride, pad);
            const Tensor ref = naive_conv(x, k, stride, pad);
            ASSERT_EQ(y.shape(), ref.shape());
            EXPECT_LE(max_abs_diff(y, ref), 1e-12) << "stride " << stride << " pad " << pad;
        }
}

TEST(Conv2d, ErrorNamesBothShapes) {
    try {
        conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), 1, 1);
        FAIL();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2,4,4]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[1,3,3,3]"), std::string::npos) << msg;
    }
    EXPECT_THROW(conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 1, 2, 2}), 1, 0), std::invalid_argument);
}

TEST(Conv2d, LinearInInput) {
    std::mt19937_64 rng(3);
    const Tensor k = random_tensor({2, 2, 3, 3}, rng);
    const Tensor x = random_tensor({2, 4, 4}, rng), y = random_tensor({2, 4, 4}, rng);
    const double a = 1.7, b = -0.3;
    const Tensor lhs = conv2d(a * x + b * y, k, 1, 1);
    const Tensor rhs = a * conv2d(x, k, 1, 1) + b * conv2d(y, k, 1, 1);
    EXPECT_LE(max_abs_diff(lhs, rhs), 1e-10);
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    Parameter x("x", random_tensor({2, 5, 5}, rng));
    Parameter k("k", random_tensor({3, 2, 3, 3}, rng));
    const Tensor c = random_tensor({3, 3, 3}, rng);
    auto loss = [&] {
        const Tensor y = conv2d(x.value, k.value, 2, 1);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
        return s;
    };
    auto backward = [&] {
        x.zero_grad();
        k.zero_grad();
        conv2d_backward(x.value, k.value, c, 2, 1, &x.grad, k.grad);
    };
    Parameter* ps[] = {&x, &k};
    EXPECT_LT(grad_check(ps, loss, backward, 1e-5).max_relative_error, 1e-7);
}

TEST(Dense, IdentityAndBias) {
    Tensor x({3}, {1.5, -2.0, 0.25});
    Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    EXPECT_EQ(dense(x, eye, Tensor::zeros({3})), x);
    Tensor b({2}, {0.3, -0.7});
    EXPECT_EQ(dense(x, Tensor::zeros({2, 3}), b), b);
    EXPECT_THROW(dense(x, Tensor::zeros({2, 4}), b), std::invalid_argument);
}

TEST(Dense, MatchesSummation) {
    std::mt19937_64 rng(5);
    const Tensor x = random_tensor({4}, rng), w = random_tensor({3, 4}, rng), b = random_tensor({3}, rng);
    const Tensor y = dense(x, w, b);
    for (std::size_t i = 0; i < 3; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < 4; ++j) s += w[i * 4 + j] * x[j];
        EXPECT_NEAR(y[i], s, 1e-12);
    }
}

TEST(Dense, LinearInInputWithoutBias) {
    std::mt19937_64 rng(6);
    const Tensor w = random_tensor({3, 5}, rng), zero = Tensor::zeros({3});
    const Tensor x = random_tensor({5}, rng), y = random_tensor({5}, rng);
    const Tensor lhs = dense(2.0 * x + (-4.0) * y, w, zero);
    const Tensor rhs = 2.0 * dense(x, w, zero) + (-4.0) * dense(y, w, zero);
    EXPECT_LE(max_abs_diff(lhs, rhs), 1e-10);
}

TEST(GlobalAvgPool, Examples) {
    EXPECT_EQ(global_avg_pool(Tensor::filled({1, 3, 2}, 5.0))[0], 5.0);
    EXPECT_EQ(global_avg_pool(Tensor({1, 2, 2}, {1, 2, 3, 4}))[0], 2.5);
    std::mt19937_64 rng(7);
    const Tensor x = random_tensor({3, 4, 4}, rng);
    const Tensor m = global_avg_pool(x);
    for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::size_t h = 0; h < 4; ++h)
            for (std::size_t w = 0; w < 4; ++w) s += x.at(c, h, w);
        EXPECT_NEAR(m[c], s / 16.0, 1e-15);
    }
}

TEST(GlobalAvgPool, InvariantUnderSpatialPermutation) {
    std::mt19937_64 rng(8);
    const Tensor x = random_tensor({2, 3, 3}, rng);
    std::vector<std::size_t> perm(9);
    for (std::size_t i = 0; i < 9; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor y({2, 3, 3});
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 9; ++i) y[c * 9 + i] = x[c * 9 + perm[i]];
    const Tensor a = global_avg_pool(x), b = global_avg_pool(y);
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(a[c], b[c], 1e-15);
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
    const auto r = softmax_cross_entropy(Tensor::zeros({4}), 2);
    EXPECT_NEAR(r.loss, std::log(4.0), 1e-15);
    EXPECT_NEAR(r.loss, 1.3863, 5e-5);
}

TEST(SoftmaxCrossEntropy, SaturatedLogits) {
    const auto r = softmax_cross_entropy(Tensor({2}, {10.0, -10.0}), 0);
    // log(1 + e^-20) evaluated without cancellation
    EXPECT_NEAR(r.loss, std::log1p(std::exp(-20.0)), 1e-20);
    EXPECT_NEAR(r.loss, 2.06e-9, 1e-11);
    EXPECT_NEAR(r.grad_logits[0], 0.0, 1e-8);
    EXPECT_NEAR(r.grad_logits[1], 0.0, 1e-8);
}

TEST(SoftmaxCrossEntropy, LabelOutOfRange) {
    EXPECT_THROW(softmax_cross_entropy(Tensor::zeros({3}), 3), std::invalid_argument);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    Parameter z("z", random_tensor({5}, rng, 2.0));
    auto loss = [&] { return softmax_cross_entropy(z.value, 3).loss; };
    auto backward = [&] { z.grad = softmax_cross_entropy(z.value, 3).grad_logits; };
    Parameter* ps[] = {&z};
    EXPECT_LT(grad_check(ps, loss, backward, 1e-5).max_relative_error, 1e-6);
}

TEST(GradCheck, LinearModelIsExact) {
    std::mt19937_64 rng(10);
    Parameter w("w", random_tensor({2, 3}, rng)), b("b", random_tensor({2}, rng));
    const Tensor x = random_tensor({3}, rng), c = random_tensor({2}, rng);
    auto loss = [&] {
        const Tensor y = dense(x, w.value, b.value);
        return c[0] * y[0] + c[1] * y[1];
    };
    auto backward = [&] {
        w.zero_grad();
        b.zero_grad();
        dense_backward(x, w.value, c, nullptr, w.grad, b.grad);
    };
    Parameter* ps[] = {&w, &b};
    EXPECT_LT(grad_check(ps, loss, backward, 1e-5).max_relative_error, 1e-7);
    EXPECT_THROW(grad_check(ps, loss, backward, 0.0), std::invalid_argument);
}

TEST(GradCheck, TwoLayerReluAwayFromKinks) {
    std::mt19937_64 rng(11);
    const double eps = 1e-5;
    Parameter w1("w1", random_tensor({6, 4}, rng)), b1("b1", random_tensor({6}, rng));
    Parameter w2("w2", random_tensor({3, 6}, rng)), b2("b2", random_tensor({3}, rng));
    const Tensor x = random_tensor({4}, rng);
    // keep every pre-activation at least 10*eps from zero so no probe crosses a kink
    Tensor pre = dense(x, w1.value, b1.value);
    for (std::size_t i = 0; i < pre.size(); ++i) {
        if (std::abs(pre[i]) < 0.05) b1.value[i] += pre[i] >= 0 ? 0.1 : -0.1;
    }
    auto loss = [&] {
        const Tensor h = relu(dense(x, w1.value, b1.value));
        return softmax_cross_entropy(dense(h, w2.value, b2.value), 1).loss;
    };
    auto backward = [&] {
        for (Parameter* p : {&w1, &b1, &w2, &b2}) p->zero_grad();
        const Tensor z1 = dense(x, w1.value, b1.value);
        const Tensor h = relu(z1);
        const auto ce = softmax_cross_entropy(dense(h, w2.value, b2.value), 1);
        Tensor gh({6});
        dense_backward(h, w2.value, ce.grad_logits, &gh, w2.grad, b2.grad);
        dense_backward(x, w1.value, relu_backward(z1, gh), nullptr, w1.grad, b1.grad);
    };
    Parameter* ps[] = {&w1, &b1, &w2, &b2};
    EXPECT_LT(grad_check(ps, loss, backward, eps).max_relative_error, 1e-5);
}

TEST(Relu, SubgradientAtZeroIsZero) {
    const Tensor g = relu_backward(Tensor({3}, {0.0, 1.0, -1.0}), Tensor::filled({3}, 1.0));
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[1], 1.0);
    EXPECT_EQ(g[2], 0.0);
}

TEST(Argmax, LowestIndexOnTies) {
    EXPECT_EQ(argmax(Tensor({4}, {1.0, 3.0, 3.0, 2.0})), 1u);
}
