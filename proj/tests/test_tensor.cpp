#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "strokeforge/errors.hpp"
#include "strokeforge/gradcheck.hpp"
#include "strokeforge/ops.hpp"

using namespace strokeforge;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::from_data(std::move(shape), std::move(v));
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Elementwise, AddAndIdentity) {
  auto a = Tensor::from_data({2}, {1, 2});
  auto b = Tensor::from_data({2}, {3, 4});
  EXPECT_EQ(values(add(a, b)), (std::vector<double>{4, 6}));
  auto x = random_tensor({3, 4}, 1);
  EXPECT_EQ(values(mul(x, Tensor::full({3, 4}, 1.0))), values(x));
}

TEST(Elementwise, ExpDerivativeAtZero) {
  auto x = Tensor::scalar(0.0, true);
  exp(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(Elementwise, ShapeMismatchNamesBothShapes) {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({4, 3});
  try {
    add(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[4,3]"), std::string::npos);
  }
}

TEST(Elementwise, DomainErrors) {
  EXPECT_THROW(log(Tensor::from_data({2}, {1.0, 0.0})), DomainError);
  EXPECT_THROW(div(Tensor::full({2}, 1.0), Tensor::from_data({2}, {1.0, 0.0})), DomainError);
}

TEST(Elementwise, BroadcastGradientEqualsSumOverTiledAxes) {
  auto a = random_tensor({2, 3, 4}, 2);
  auto b = random_tensor({3, 1}, 3);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  auto w = random_tensor({2, 3, 4}, 4);
  sum(mul(mul(a, b), w)).backward();

  // Explicit tiling oracle: d/db[j] = sum_{i,k} a[i,j,k] w[i,j,k].
  for (std::size_t j = 0; j < 3; ++j) {
    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t k = 0; k < 4; ++k) expected += a[(i * 3 + j) * 4 + k] * w[(i * 3 + j) * 4 + k];
    }
    EXPECT_NEAR(b.grad()[j], expected, 1e-12);
  }
}

TEST(Activation, BasicValues) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  auto r = relu(Tensor::from_data({2}, {-3.0, 3.0}));
  EXPECT_EQ(values(r), (std::vector<double>{0.0, 3.0}));
  auto s = softmax(Tensor::full({1, 3}, 0.7), 1);
  for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Activation, SoftmaxRowsSumToOneAndSigmoidOpenInterval) {
  auto x = random_tensor({4, 5, 3}, 5, -30.0, 30.0);
  auto s = softmax(x, 1);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t c = 0; c < 3; ++c) {
      double total = 0.0;
      for (std::size_t k = 0; k < 5; ++k) total += s[(a * 5 + k) * 3 + c];
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
  auto y = sigmoid(random_tensor({200}, 6, -20.0, 20.0));
  for (double v : y.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Conv2d, IdentityKernel) {
  auto x = random_tensor({2, 3, 5, 5}, 7);
  std::vector<double> k(9, 0.0);
  for (std::size_t c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
  auto out = conv2d(x, Tensor::from_data({3, 3, 1, 1}, k), Tensor::zeros({3}));
  EXPECT_EQ(values(out), values(x));
}

TEST(Conv2d, AllOnesKernelOnConstantField) {
  auto x = Tensor::full({1, 1, 5, 5}, 2.5);
  auto out = conv2d(x, Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 1, 1);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 5, 5}));
  EXPECT_DOUBLE_EQ(out[2 * 5 + 2], 9 * 2.5);
  EXPECT_DOUBLE_EQ(out[0], 4 * 2.5);
}

TEST(Conv2d, GeometryErrors) {
  auto x = Tensor::zeros({1, 1, 6, 6});
  EXPECT_THROW(conv2d(x, Tensor::zeros({1, 1, 3, 3}), {}, 2, 0), GeometryError);
  EXPECT_THROW(conv2d(x, Tensor::zeros({1, 1, 2, 2}), {}, 1, 0), GeometryError);
  EXPECT_EQ(conv2d(Tensor::zeros({1, 1, 7, 7}), Tensor::zeros({1, 1, 3, 3}), {}, 2, 1).shape(),
            (Shape{1, 1, 4, 4}));
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  auto x = random_tensor({2, 1, 4, 4}, 8);
  auto k = random_tensor({3, 1, 3, 3}, 9);
  auto b = random_tensor({3}, 10);
  auto w = random_tensor({2, 3, 4, 4}, 11);
  const double err = gradcheck([&] { return sum(mul(conv2d(x, k, b, 1, 1), w)); }, {x, k, b});
  EXPECT_LT(err, 1e-4);
  auto x2 = random_tensor({2, 1, 5, 5}, 23);
  auto k2 = random_tensor({2, 1, 3, 3}, 12);
  auto w2 = random_tensor({2, 2, 3, 3}, 13);
  EXPECT_LT(gradcheck([&] { return sum(mul(conv2d(x2, k2, {}, 2, 1), w2)); }, {x2, k2}), 1e-4);
}

TEST(PoolResize, MaxpoolUpsampleConcat) {
  auto x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(maxpool2(x)), (std::vector<double>{4}));
  EXPECT_THROW(maxpool2(Tensor::zeros({1, 1, 3, 4})), GeometryError);

  auto r = random_tensor({2, 3, 4, 4}, 14);
  auto up = upsample_nearest2(r);
  EXPECT_EQ(up.shape(), (Shape{2, 3, 8, 8}));
  // Average over each 2x2 block recovers the original.
  for (std::size_t p = 0; p < 6; ++p) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) s += up[p * 64 + (2 * i + a) * 8 + 2 * j + b];
        }
        EXPECT_DOUBLE_EQ(s / 4.0, r[p * 16 + i * 4 + j]);
      }
    }
  }
  auto cat = concat_channels(Tensor::zeros({2, 3, 4, 4}), Tensor::zeros({2, 4, 4, 4}));
  EXPECT_EQ(cat.shape(), (Shape{2, 7, 4, 4}));
  EXPECT_THROW(concat_channels(Tensor::zeros({2, 3, 4, 4}), Tensor::zeros({1, 4, 4, 4})), ShapeError);
  EXPECT_EQ(avgpool_global(r).shape(), (Shape{2, 3, 1, 1}));
}

TEST(Reduce, SumAndMean) {
  EXPECT_DOUBLE_EQ(sum(Tensor::full({2, 3}, 1.0)).item(), 6.0);
  auto x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(sum(x, {0}, false)), (std::vector<double>{4, 6}));
  auto y = random_tensor({3, 5}, 15);
  y.set_requires_grad(true);
  mean(y).backward();
  for (double g : y.grad()) EXPECT_DOUBLE_EQ(g, 1.0 / 15.0);
}

TEST(Backward, AnalyticCasesAndAccumulation) {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  sum(x).backward();
  EXPECT_EQ(x.grad(), (std::vector<double>{1, 1}));
  x.zero_grad();
  auto loss = sum(mul(x, x));
  loss.backward();
  EXPECT_EQ(x.grad(), (std::vector<double>{2, 4}));
  loss.backward();
  EXPECT_EQ(x.grad(), (std::vector<double>{4, 8}));
  EXPECT_THROW(mul(x, x).backward(), ShapeError);
}

TEST(Backward, DiamondGraphVisitsSharedNodeOnce) {
  auto x = Tensor::from_data({3}, {0.5, -1.0, 2.0}, true);
  auto e = exp(x);
  auto loss = sum(add(mul(e, e), e));
  loss.backward();
  for (std::size_t i = 0; i < 3; ++i) {
    const double ev = std::exp(x[i]);
    EXPECT_NEAR(x.grad()[i], 2 * ev * ev + ev, 1e-12);
  }
}

TEST(Gradcheck, Contract) {
  auto x = random_tensor({3, 4}, 16);
  EXPECT_LT(gradcheck([](const Tensor& t) { return sum(t); }, x), 1e-10);
  EXPECT_LT(gradcheck([](const Tensor& t) { return sum(sigmoid(t)); }, x), 1e-6);
  EXPECT_THROW(gradcheck([](const Tensor& t) { return sum(t); }, x, 1e-2), std::invalid_argument);
  EXPECT_THROW(gradcheck([](const Tensor& t) { return sum(scale(t, std::nan(""))); }, x), GradcheckError);
}

TEST(Gradcheck, EveryElementwiseAndActivationOp) {
  auto pos = random_tensor({2, 3}, 17, 0.5, 2.0);
  auto any = random_tensor({2, 3}, 18);
  auto other = random_tensor({3}, 19, 0.5, 2.0);
  auto w = random_tensor({2, 3}, 20);
  auto wsum = [&](const Tensor& t) { return sum(mul(t, w)); };
  EXPECT_LT(gradcheck([&] { return wsum(add(any, other)); }, {any, other}), 1e-4);
  EXPECT_LT(gradcheck([&] { return wsum(sub(any, other)); }, {any, other}), 1e-4);
  EXPECT_LT(gradcheck([&] { return wsum(mul(any, other)); }, {any, other}), 1e-4);
  EXPECT_LT(gradcheck([&] { return wsum(div(any, other)); }, {any, other}), 1e-4);
  EXPECT_LT(gradcheck([&](const Tensor& t) { return wsum(exp(t)); }, any), 1e-4);
  EXPECT_LT(gradcheck([&](const Tensor& t) { return wsum(log(t)); }, pos), 1e-4);
  EXPECT_LT(gradcheck([&](const Tensor& t) { return wsum(abs(t)); }, any), 1e-4);
  EXPECT_LT(gradcheck([&](const Tensor& t) { return wsum(square(t)); }, any), 1e-4);
  EXPECT_LT(gradcheck([&](const Tensor& t) { return wsum(sqrt(t)); }, pos), 1e-4);
  EXPECT_LT(gradcheck([&](const Tensor& t) { return wsum(relu(t)); }, any), 1e-4);
  EXPECT_LT(gradcheck([&](const Tensor& t) { return wsum(softmax(t, 1)); }, any), 1e-4);
  EXPECT_LT(gradcheck([&](const Tensor& t) { return wsum(softmax(t, 0)); }, any), 1e-4);
}

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  auto x = random_tensor({1, 2, 8, 8}, 21);
  auto k = random_tensor({4, 2, 3, 3}, 22);
  auto f = [&] { return values(softmax(maxpool2(relu(conv2d(x, k, {}, 1, 1))), 1)); };
  EXPECT_EQ(f(), f());
}

TEST(Gradcheck, MultiStepToleratesKinksButNotWrongGradients) {
  auto x = Tensor::from_data({3}, {5e-5, -0.7, 1.3});
  auto kinked = [&] { return sum(abs(x)); };
  EXPECT_GT(gradcheck(kinked, {x}, 1e-4), 1e-4);
  EXPECT_LT(gradcheck(kinked, {x}, {1e-4, 1e-5}, 1e-4), 1e-4);
  // x * stop_gradient(x): autodiff sees half the true derivative.
  auto wrong = [&] { return sum(mul(x, x.detach())); };
  EXPECT_GT(gradcheck(wrong, {x}, {1e-4, 1e-5, 1e-6}, 1e-4), 0.4);
  EXPECT_THROW(gradcheck(kinked, {x}, std::vector<double>{}, 1e-4), std::invalid_argument);
}
