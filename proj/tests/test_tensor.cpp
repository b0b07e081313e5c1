#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "afgn/adam.hpp"
#include "afgn/ops.hpp"
#include "afgn/tensor.hpp"
#include "oracles.hpp"

using afgn::Tensor;

namespace {

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double acc = 0;
  auto va = a.values();
  auto vb = b.values();
  for (size_t i = 0; i < va.size(); ++i)
    acc += static_cast<double>(va[i]) * static_cast<double>(vb[i]);
  return acc;
}

}  // namespace

TEST(Tensor, ShapeAndDataInvariant) {
  Tensor<float> t({2, 3, 4}, 0.5f);
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.shape(), (std::vector<size_t>{2, 3, 4}));
  EXPECT_THROW(Tensor<float>({2, 0, 4}), afgn::ShapeError);
  EXPECT_THROW(Tensor<float>::from({2, 2}, {1.0f}), afgn::ShapeError);
}

TEST(Tensor, GradLifecycle) {
  Tensor<float> x({3}, 2.0f);
  x.set_requires_grad(true);
  EXPECT_FALSE(x.has_grad());
  EXPECT_THROW(x.grad(), afgn::ValueError);
  auto loss = afgn::sum(x);
  loss.backward();
  ASSERT_TRUE(x.has_grad());
  for (float g : x.grad()) EXPECT_FLOAT_EQ(g, 1.0f);
}

TEST(Backward, RequiresScalarRoot) {
  Tensor<float> x({2}, 1.0f);
  x.set_requires_grad(true);
  auto y = afgn::relu(x);
  EXPECT_THROW(y.backward(), afgn::ValueError);
}

TEST(Backward, SecondCallWithoutFreshForwardRejected) {
  Tensor<float> x({2}, 1.0f);
  x.set_requires_grad(true);
  auto loss = afgn::sum(x);
  loss.backward();
  EXPECT_THROW(loss.backward(), afgn::ValueError);
}

TEST(Backward, MseOnSingleElement) {
  // d/dx mean((x-0)^2) at x=2 is 2*x = 4
  Tensor<float> x({1}, 2.0f);
  x.set_requires_grad(true);
  Tensor<float> zero({1}, 0.0f);
  auto loss = afgn::mse_loss(x, zero);
  loss.backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 4.0f);
}

TEST(Backward, DiamondGraphAccumulatesBothPaths) {
  // loss = mse(relu(x), x): x feeds the loss through two paths
  Tensor<double> x({4});
  auto vals = x.values();
  double init[4] = {1.0, -2.0, 3.0, -0.5};
  for (int i = 0; i < 4; ++i) vals[i] = init[i];
  x.set_requires_grad(true);
  auto loss = afgn::mse_loss(afgn::relu(x), x);
  loss.backward();

  std::vector<double> flat(init, init + 4);
  auto numeric = oracle::finite_diff(flat, 1e-5, [&] {
    double acc = 0;
    for (double v : flat) {
      double r = v > 0 ? v : 0;
      acc += (r - v) * (r - v);
    }
    return acc / 4.0;
  });
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(x.grad()[i], numeric[i], 1e-6) << "element " << i;
}

TEST(Relu, Examples) {
  Tensor<float> x = Tensor<float>::from({3}, {-1.0f, 0.0f, 2.0f});
  auto y = afgn::relu(x);
  EXPECT_FLOAT_EQ(y.values()[0], 0.0f);
  EXPECT_FLOAT_EQ(y.values()[1], 0.0f);
  EXPECT_FLOAT_EQ(y.values()[2], 2.0f);

  // all-nonnegative input is passed through unchanged
  Tensor<float> p = Tensor<float>::from({3}, {0.5f, 0.0f, 7.0f});
  auto yp = afgn::relu(p);
  for (size_t i = 0; i < 3; ++i) EXPECT_FLOAT_EQ(yp.values()[i], p.values()[i]);

  // gradient mask is indicator(x > 0); exactly 0 at the kink
  Tensor<float> g = Tensor<float>::from({3}, {-1.0f, 0.0f, 2.0f});
  g.set_requires_grad(true);
  afgn::sum(afgn::relu(g)).backward();
  EXPECT_FLOAT_EQ(g.grad()[0], 0.0f);
  EXPECT_FLOAT_EQ(g.grad()[1], 0.0f);
  EXPECT_FLOAT_EQ(g.grad()[2], 1.0f);
}

TEST(Mse, Examples) {
  Tensor<float> a = Tensor<float>::from({2}, {1.0f, 1.0f});
  Tensor<float> b = Tensor<float>::from({2}, {0.0f, 0.0f});
  EXPECT_FLOAT_EQ(afgn::mse_loss(a, a).item(), 0.0f);
  EXPECT_FLOAT_EQ(afgn::mse_loss(a, b).item(), 1.0f);
  EXPECT_THROW(afgn::mse_loss(a, Tensor<float>({3})), afgn::ShapeError);

  // random pair against a plain elementwise loop
  afgn::Rng rng(7);
  auto p = oracle::random_tensor<float>({4, 5}, rng);
  auto t = oracle::random_tensor<float>({4, 5}, rng);
  double want = 0;
  for (size_t i = 0; i < p.numel(); ++i) {
    double d = p.values()[i] - t.values()[i];
    want += d * d;
  }
  want /= p.numel();
  EXPECT_NEAR(afgn::mse_loss(p, t).item(), want, 1e-7);
}

TEST(SoftmaxCrossEntropy, Examples) {
  // logits [0,0], one-hot label -> ln 2
  auto z = Tensor<float>::from({1, 2}, {0.0f, 0.0f});
  auto y = Tensor<float>::from({1, 2}, {1.0f, 0.0f});
  EXPECT_NEAR(afgn::softmax_cross_entropy(z, y).item(), std::log(2.0), 1e-6);

  // symmetric logits with label [0.5, 0.5] -> ln 2
  auto z2 = Tensor<float>::from({1, 2}, {1.3f, 1.3f});
  auto y2 = Tensor<float>::from({1, 2}, {0.5f, 0.5f});
  EXPECT_NEAR(afgn::softmax_cross_entropy(z2, y2).item(), std::log(2.0), 1e-6);

  // label rows must sum to 1
  auto bad = Tensor<float>::from({1, 2}, {0.7f, 0.4f});
  EXPECT_THROW(afgn::softmax_cross_entropy(z, bad), afgn::ValueError);
  auto neg = Tensor<float>::from({1, 2}, {1.5f, -0.5f});
  EXPECT_THROW(afgn::softmax_cross_entropy(z, neg), afgn::ValueError);
}

TEST(SoftmaxCrossEntropy, GradientMatchesSoftmaxMinusLabel) {
  afgn::Rng rng(11);
  Tensor<double> z = oracle::random_tensor<double>({5, 2}, rng, -2, 2);
  std::vector<double> raw(5 * 2);
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = z.values()[i];
  // soft labels on the simplex
  std::vector<double> lab(5 * 2);
  for (int n = 0; n < 5; ++n) {
    double a = rng.uniform(0.05, 0.95);
    lab[n * 2] = a;
    lab[n * 2 + 1] = 1 - a;
  }
  Tensor<double> y = Tensor<double>::from({5, 2}, std::vector<double>(lab));
  z.set_requires_grad(true);
  afgn::softmax_cross_entropy(z, y).backward();

  // closed form (softmax - label)/N
  for (int n = 0; n < 5; ++n) {
    double m = std::max(raw[n * 2], raw[n * 2 + 1]);
    double e0 = std::exp(raw[n * 2] - m), e1 = std::exp(raw[n * 2 + 1] - m);
    double p0 = e0 / (e0 + e1);
    EXPECT_NEAR(z.grad()[n * 2], (p0 - lab[n * 2]) / 5.0, 1e-9);
  }

  // and against central finite differences
  auto numeric = oracle::finite_diff(raw, 1e-5, [&] {
    double acc = 0;
    for (int n = 0; n < 5; ++n) {
      double m = std::max(raw[n * 2], raw[n * 2 + 1]);
      double lse =
          m + std::log(std::exp(raw[n * 2] - m) + std::exp(raw[n * 2 + 1] - m));
      acc += lse - lab[n * 2] * raw[n * 2] - lab[n * 2 + 1] * raw[n * 2 + 1];
    }
    return acc / 5.0;
  });
  std::vector<double> got(z.grad().begin(), z.grad().end());
  EXPECT_LT(oracle::max_rel_err(got, numeric), 1e-6);
}

TEST(Conv2d, ShapeArithmetic) {
  Tensor<float> x({1, 3, 64, 64}, 0.1f);
  Tensor<float> k({8, 3, 4, 4}, 0.01f);
  auto y = afgn::conv2d(x, k, 2, 1);
  EXPECT_EQ(y.shape(), (std::vector<size_t>{1, 8, 32, 32}));
}

TEST(Conv2d, OneByOneIdentity) {
  afgn::Rng rng(3);
  auto x = oracle::random_tensor<float>({2, 1, 5, 5}, rng);
  auto k = Tensor<float>::from({1, 1, 1, 1}, {1.0f});
  auto y = afgn::conv2d(x, k, 1, 0);
  ASSERT_EQ(y.shape(), x.shape());
  for (size_t i = 0; i < x.numel(); ++i)
    EXPECT_FLOAT_EQ(y.values()[i], x.values()[i]);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  afgn::Rng rng(5);
  auto x = oracle::random_tensor<float>({1, 1, 5, 5}, rng);
  auto k = oracle::random_tensor<float>({1, 1, 3, 3}, rng);
  auto y = afgn::conv2d(x, k, 1, 0);
  auto want = oracle::conv2d_loop(
      std::vector<float>(x.values().begin(), x.values().end()), 1, 1, 5, 5,
      std::vector<float>(k.values().begin(), k.values().end()), 1, 3, 3, 1, 0);
  ASSERT_EQ(y.numel(), want.size());
  for (size_t i = 0; i < want.size(); ++i)
    EXPECT_NEAR(y.values()[i], want[i], 1e-6);
}

TEST(Conv2d, OracleSweepOverStridesAndPads) {
  afgn::Rng rng(17);
  for (int stride : {1, 2, 3}) {
    for (int pad : {0, 1, 2}) {
      auto x = oracle::random_tensor<float>({2, 3, 9, 7}, rng);
      auto k = oracle::random_tensor<float>({4, 3, 3, 3}, rng);
      auto y = afgn::conv2d(x, k, stride, pad);
      auto want = oracle::conv2d_loop(
          std::vector<float>(x.values().begin(), x.values().end()), 2, 3, 9, 7,
          std::vector<float>(k.values().begin(), k.values().end()), 4, 3, 3,
          stride, pad);
      ASSERT_EQ(y.numel(), want.size()) << "s=" << stride << " p=" << pad;
      for (size_t i = 0; i < want.size(); ++i)
        ASSERT_NEAR(y.values()[i], want[i], 1e-5)
            << "s=" << stride << " p=" << pad << " i=" << i;
    }
  }
}

TEST(Conv2d, RejectsMismatchedShapes) {
  Tensor<float> x({1, 3, 8, 8}, 0.0f);
  Tensor<float> k({4, 2, 3, 3}, 0.0f);  // wrong channel count
  try {
    afgn::conv2d(x, k, 1, 1);
    FAIL() << "expected ShapeError";
  } catch (const afgn::ShapeError& e) {
    // the dimension report names both shapes
    EXPECT_NE(std::string(e.what()).find("[1,3,8,8]"), std::string::npos);
  }
  Tensor<float> huge({1, 3, 2, 2}, 0.0f);
  Tensor<float> k2({4, 3, 5, 5}, 0.0f);
  EXPECT_THROW(afgn::conv2d(huge, k2, 1, 0), afgn::ShapeError);
  EXPECT_THROW(afgn::conv2d(x, Tensor<float>({4, 3, 3, 3}), 0, 0),
               afgn::ValueError);
}

TEST(ConvTranspose, ShapeArithmetic) {
  Tensor<float> x({1, 4, 32, 32}, 0.1f);
  Tensor<float> k({4, 3, 4, 4}, 0.01f);
  auto y = afgn::conv2d_transpose(x, k, 2, 1);
  EXPECT_EQ(y.shape(), (std::vector<size_t>{1, 3, 64, 64}));
}

TEST(ConvTranspose, MatchesScatterOracle) {
  afgn::Rng rng(23);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      auto x = oracle::random_tensor<float>({2, 3, 5, 6}, rng);
      auto k = oracle::random_tensor<float>({3, 2, 4, 4}, rng);
      auto y = afgn::conv2d_transpose(x, k, stride, pad);
      auto want = oracle::conv2d_transpose_loop(
          std::vector<float>(x.values().begin(), x.values().end()), 2, 3, 5, 6,
          std::vector<float>(k.values().begin(), k.values().end()), 2, 4, 4,
          stride, pad);
      ASSERT_EQ(y.numel(), want.size());
      for (size_t i = 0; i < want.size(); ++i)
        ASSERT_NEAR(y.values()[i], want[i], 1e-5)
            << "s=" << stride << " p=" << pad;
    }
  }
}

TEST(ConvTranspose, EqualsFullCorrelationWithFlippedKernel) {
  // stride 1, pad 0 transpose == full correlation against the
  // spatially-flipped, channel-swapped kernel
  afgn::Rng rng(29);
  auto x = oracle::random_tensor<double>({1, 2, 6, 6}, rng);
  auto k = oracle::random_tensor<double>({2, 3, 3, 3}, rng);  // [C,K,kh,kw]
  auto y = afgn::conv2d_transpose(x, k, 1, 0);

  std::vector<double> flipped(2 * 3 * 3 * 3);  // conv layout [K,C,kh,kw]
  for (int c = 0; c < 2; ++c)
    for (int kk = 0; kk < 3; ++kk)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          flipped[((kk * 2 + c) * 3 + (2 - i)) * 3 + (2 - j)] =
              k.values()[((c * 3 + kk) * 3 + i) * 3 + j];
  auto want = oracle::conv2d_loop(
      std::vector<double>(x.values().begin(), x.values().end()), 1, 2, 6, 6,
      flipped, 3, 3, 3, 1, /*pad=*/2);
  ASSERT_EQ(y.numel(), want.size());
  for (size_t i = 0; i < want.size(); ++i)
    EXPECT_NEAR(y.values()[i], want[i], 1e-9);
}

TEST(ConvTranspose, AdjointIdentity) {
  // <conv2d(a,k), b> == <a, conv2d_transpose(b,k)> with matched stride/pad
  afgn::Rng rng(31);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      auto a = oracle::random_tensor<float>({2, 3, 4, 4}, rng);
      auto k = oracle::random_tensor<float>({5, 3, 3, 3}, rng);
      auto conv = afgn::conv2d(a, k, stride, pad);
      auto b = oracle::random_tensor<float>(conv.shape(), rng);
      auto back = afgn::conv2d_transpose(b, k, stride, pad);
      ASSERT_EQ(back.shape(), a.shape());
      EXPECT_NEAR(dot(conv, b), dot(a, back),
                  1e-5 * std::max(1.0, std::abs(dot(conv, b))));
    }
  }
}

TEST(ConvTranspose, RestoresExtentsAfterStride2Conv) {
  // 4x4 kernel, stride 2, pad 1 halves then doubles exactly on even sides
  afgn::Rng rng(37);
  for (size_t side : {8, 16, 64}) {
    auto x = oracle::random_tensor<float>({1, 3, side, side}, rng);
    auto k = oracle::random_tensor<float>({6, 3, 4, 4}, rng);
    auto down = afgn::conv2d(x, k, 2, 1);
    EXPECT_EQ(down.extent(2), side / 2);
    auto kt = oracle::random_tensor<float>({6, 3, 4, 4}, rng);
    auto up = afgn::conv2d_transpose(down, kt, 2, 1);
    EXPECT_EQ(up.extent(2), side);
    EXPECT_EQ(up.extent(3), side);
  }
}

TEST(Ops, ForwardStaysFiniteOnFiniteInputs) {
  afgn::Rng rng(41);
  auto x = oracle::random_tensor<float>({2, 3, 8, 8}, rng, -10, 10);
  auto k = oracle::random_tensor<float>({4, 3, 4, 4}, rng, -10, 10);
  EXPECT_TRUE(afgn::conv2d(x, k, 2, 1).all_finite());
  EXPECT_TRUE(afgn::relu(x).all_finite());
  auto kt = oracle::random_tensor<float>({3, 4, 4, 4}, rng, -10, 10);
  EXPECT_TRUE(afgn::conv2d_transpose(x, kt, 2, 1).all_finite());
  auto z = oracle::random_tensor<float>({4, 2}, rng, -50, 50);
  auto y = Tensor<float>::from({4, 2}, {1, 0, 0, 1, 1, 0, 0, 1});
  EXPECT_TRUE(afgn::softmax_cross_entropy(z, y).all_finite());
}

TEST(Ops, DeterministicBitIdenticalForward) {
  afgn::Rng rng(43);
  auto x = oracle::random_tensor<float>({2, 3, 16, 16}, rng);
  auto k = oracle::random_tensor<float>({8, 3, 4, 4}, rng);
  afgn::set_num_threads(1);
  auto y1 = afgn::conv2d(x, k, 2, 1);
  auto y2 = afgn::conv2d(x, k, 2, 1);
  afgn::set_num_threads(0);
  auto y3 = afgn::conv2d(x, k, 2, 1);  // thread count must not matter
  EXPECT_EQ(0, std::memcmp(y1.data(), y2.data(), y1.numel() * sizeof(float)));
  EXPECT_EQ(0, std::memcmp(y1.data(), y3.data(), y1.numel() * sizeof(float)));
}

TEST(CompositeGraph, ConvReluMseFiniteDifferences) {
  afgn::Rng rng(47);
  Tensor<double> x = oracle::random_tensor<double>({1, 2, 6, 6}, rng);
  Tensor<double> k = oracle::random_tensor<double>({3, 2, 3, 3}, rng);
  Tensor<double> target = oracle::random_tensor<double>({1, 3, 6, 6}, rng);
  x.set_requires_grad(true);
  k.set_requires_grad(true);
  afgn::mse_loss(afgn::relu(afgn::conv2d(x, k, 1, 1)), target).backward();

  std::vector<double> kflat(k.values().begin(), k.values().end());
  std::vector<double> xflat(x.values().begin(), x.values().end());
  auto eval = [&] {
    auto y = oracle::conv2d_loop(xflat, 1, 2, 6, 6, kflat, 3, 3, 3, 1, 1);
    double acc = 0;
    for (size_t i = 0; i < y.size(); ++i) {
      double r = y[i] > 0 ? y[i] : 0;
      double d = r - target.values()[i];
      acc += d * d;
    }
    return acc / y.size();
  };
  auto kn = oracle::finite_diff(kflat, 1e-4, eval);
  std::vector<double> kg(k.grad().begin(), k.grad().end());
  EXPECT_LT(oracle::max_rel_err(kg, kn), 1e-4);

  auto xn = oracle::finite_diff(xflat, 1e-4, eval);
  std::vector<double> xg(x.grad().begin(), x.grad().end());
  EXPECT_LT(oracle::max_rel_err(xg, xn), 1e-4);
}

TEST(NoGrad, SuppressesGraphConstruction) {
  Tensor<float> x({4}, 1.0f);
  x.set_requires_grad(true);
  afgn::NoGradGuard guard;
  auto y = afgn::sum(afgn::relu(x));
  EXPECT_FALSE(y.requires_grad());
  y.backward();  // detached scalar: nothing reaches x
  EXPECT_FALSE(x.has_grad());
}

TEST(Adam, RejectsNonPositiveLearningRate) {
  Tensor<float> p({2}, 1.0f);
  p.set_requires_grad(true);
  EXPECT_THROW(afgn::Adam<float>({p}, 0.0), afgn::ValueError);
  EXPECT_THROW(afgn::Adam<float>({p}, -1e-3), afgn::ValueError);
}

TEST(Adam, ZeroGradLeavesParamsUnchanged) {
  Tensor<float> p = Tensor<float>::from({3}, {1.0f, -2.0f, 0.5f});
  p.set_requires_grad(true);
  p.grad_mut();  // allocate zero grads
  afgn::Adam<float> opt({p}, 0.1);
  opt.step();
  EXPECT_FLOAT_EQ(p.values()[0], 1.0f);
  EXPECT_FLOAT_EQ(p.values()[1], -2.0f);
  EXPECT_FLOAT_EQ(p.values()[2], 0.5f);
}

TEST(Adam, FirstStepMovesByLrAgainstGradSign) {
  Tensor<float> p = Tensor<float>::from({2}, {1.0f, 1.0f});
  p.set_requires_grad(true);
  auto g = p.grad_mut();
  g[0] = 0.3f;
  g[1] = -5.0f;
  const double lr = 0.01;
  afgn::Adam<float> opt({p}, lr);
  opt.step();
  // bias-corrected first step is -lr * g/(|g| + eps)
  EXPECT_NEAR(p.values()[0], 1.0f - lr, 1e-6);
  EXPECT_NEAR(p.values()[1], 1.0f + lr, 1e-6);
  EXPECT_LE(std::abs(p.values()[0] - 1.0f), lr * (1 + 1e-6));
}

TEST(Adam, QuadraticConvergesAndTracksScalarOracle) {
  Tensor<float> x = Tensor<float>::from({1}, {1.0f});
  x.set_requires_grad(true);
  afgn::Adam<float> opt({x}, 0.1);
  oracle::ScalarAdam ref(0.1);
  double xref = 1.0;
  for (int i = 0; i < 100; ++i) {
    opt.zero_grad();
    auto loss = afgn::mse_loss(x, Tensor<float>({1}, 0.0f));
    loss.backward();
    opt.step();
    xref = ref.step(xref, 2.0 * xref);
    ASSERT_NEAR(x.values()[0], xref, 1e-4) << "step " << i;
  }
  EXPECT_LT(std::abs(x.values()[0]), 0.1);
}

TEST(Adam, StateEvolutionIsDeterministic) {
  auto run = [] {
    Tensor<float> p = Tensor<float>::from({4}, {1, 2, 3, 4});
    p.set_requires_grad(true);
    afgn::Adam<float> opt({p}, 0.05);
    for (int i = 0; i < 20; ++i) {
      opt.zero_grad();
      afgn::mse_loss(p, Tensor<float>({4}, 0.0f)).backward();
      opt.step();
    }
    return std::vector<float>(p.values().begin(), p.values().end());
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(float)));
}
