#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "psg/losses.hpp"
#include "psg/ops.hpp"
#include "psg/tensor.hpp"
#include "support/grad_suite.hpp"

using namespace psg;
using psg::testing::random_tensor;

namespace {

// Direct six-loop cross-correlation.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int s,
                               int p, int d) {
  const long B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long O = w.dim(0), K = w.dim(2);
  const long OH = (H + 2 * p - d * (K - 1) - 1) / s + 1;
  const long OW = (W + 2 * p - d * (K - 1) - 1) / s + 1;
  std::vector<double> out;
  for (long n = 0; n < B; ++n)
    for (long o = 0; o < O; ++o)
      for (long oy = 0; oy < OH; ++oy)
        for (long ox = 0; ox < OW; ++ox) {
          double acc = b.defined() ? b.values()[o] : 0.0;
          for (long c = 0; c < C; ++c)
            for (long ky = 0; ky < K; ++ky)
              for (long kx = 0; kx < K; ++kx) {
                const long iy = oy * s - p + ky * d, ix = ox * s - p + kx * d;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x.values()[((n * C + c) * H + iy) * W + ix] *
                       w.values()[((o * C + c) * K + ky) * K + kx];
              }
          out.push_back(acc);
        }
  return out;
}

}  // namespace

TEST(Tensor, ValueCountMustMatchShape) {
  EXPECT_THROW(Tensor::from_values({2, 3}, {1, 2, 3}), ShapeError);
  EXPECT_EQ(Tensor::zeros({2, 3, 4}).numel(), 24u);
}

TEST(Tensor, OpOutputsAreReadOnly) {
  Tensor x = Tensor::full({2}, 1.0, true);
  Tensor y = relu(x);
  EXPECT_THROW(y.mutable_values(), std::logic_error);
}

TEST(Conv2d, AllOnesWindowSums) {
  const Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor y = conv2d(x, w, Tensor(), 1, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_DOUBLE_EQ(y.values()[4], 9.0);
  for (std::size_t corner : {0u, 2u, 6u, 8u}) EXPECT_DOUBLE_EQ(y.values()[corner], 4.0);
}

TEST(Conv2d, IdentityKernel) {
  const Tensor x = random_tensor({2, 1, 5, 4}, -2, 2, 3, false);
  const Tensor y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor::zeros({1}));
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
            std::vector<double>(x.values().begin(), x.values().end()));
}

TEST(Conv2d, MatchesNaiveLoopsAndOutputSize) {
  struct Geo { int s, p, d, k; };
  for (const Geo g : {Geo{1, 0, 1, 3}, Geo{2, 1, 1, 3}, Geo{1, 2, 2, 3}, Geo{1, 4, 4, 3},
                      Geo{3, 1, 1, 5}, Geo{1, 0, 1, 1}, Geo{2, 0, 1, 1}}) {
    const Tensor x = random_tensor({2, 3, 9, 7}, -2, 2, 11, false);
    const Tensor w = random_tensor({4, 3, static_cast<std::size_t>(g.k), static_cast<std::size_t>(g.k)}, -1, 1, 12, false);
    const Tensor b = random_tensor({4}, -1, 1, 13, false);
    const Tensor y = conv2d(x, w, b, g.s, g.p, g.d);
    const std::size_t oh = (9 + 2 * g.p - g.d * (g.k - 1) - 1) / g.s + 1;
    const std::size_t ow = (7 + 2 * g.p - g.d * (g.k - 1) - 1) / g.s + 1;
    ASSERT_EQ(y.shape(), (Shape{2, 4, oh, ow}));
    const auto ref = naive_conv(x, w, b, g.s, g.p, g.d);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(y.values()[i], ref[i], 1e-12);
  }
}

TEST(Conv2d, DilationEqualsZeroInsertedKernel) {
  const Tensor x = random_tensor({1, 2, 10, 10}, -2, 2, 14, false);
  const Tensor w = random_tensor({3, 2, 3, 3}, -1, 1, 15, false);
  std::vector<double> wide(3 * 2 * 5 * 5, 0.0);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx)
          wide[((o * 2 + c) * 5 + 2 * ky) * 5 + 2 * kx] = w.values()[((o * 2 + c) * 3 + ky) * 3 + kx];
  const Tensor dilated = conv2d(x, w, Tensor(), 1, 2, 2);
  const Tensor inserted = conv2d(x, Tensor::from_values({3, 2, 5, 5}, wide), Tensor(), 1, 2, 1);
  ASSERT_EQ(dilated.shape(), inserted.shape());
  for (std::size_t i = 0; i < dilated.numel(); ++i) {
    EXPECT_NEAR(dilated.values()[i], inserted.values()[i], 1e-12);
  }
}

TEST(Conv2d, RejectsShapeMismatch) {
  const Tensor x = Tensor::zeros({1, 3, 5, 5});
  EXPECT_THROW(conv2d(x, Tensor::zeros({2, 4, 3, 3}), Tensor()), ShapeError);
  EXPECT_THROW(conv2d(x, Tensor::zeros({2, 3, 3, 3}), Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(conv2d(Tensor::zeros({3, 5, 5}), Tensor::zeros({2, 3, 3, 3}), Tensor()), ShapeError);
}

TEST(Conv2d, BitReproducible) {
  const Tensor x = random_tensor({2, 8, 12, 12}, -2, 2, 16, false);
  const Tensor w = random_tensor({8, 8, 3, 3}, -1, 1, 17, false);
  const Tensor a = conv2d(x, w, Tensor(), 1, 1, 1);
  const Tensor b = conv2d(x, w, Tensor(), 1, 1, 1);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

TEST(MaxPool2d, DilatesAPoint) {
  std::vector<double> v(25, 0.0);
  v[12] = 1.0;
  const Tensor y = maxpool2d(Tensor::from_values({1, 1, 5, 5}, v), 3, 1, 1);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      const bool in_block = r >= 1 && r <= 3 && c >= 1 && c <= 3;
      EXPECT_EQ(y.values()[r * 5 + c], in_block ? 1.0 : 0.0);
    }
}

TEST(MaxPool2d, ConstantUnchanged) {
  const Tensor y = maxpool2d(Tensor::full({1, 2, 4, 4}, 0.3), 3, 1, 1);
  for (double v : y.values()) EXPECT_EQ(v, 0.3);
}

TEST(MaxPool2d, MatchesWindowScan) {
  const Tensor x = random_tensor({1, 1, 6, 6}, 0, 1, 18, false);
  const Tensor y = maxpool2d(x, 3, 1, 1);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) {
      double m = -1.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr >= 0 && rr < 6 && cc >= 0 && cc < 6) m = std::max(m, x.values()[rr * 6 + cc]);
        }
      EXPECT_EQ(y.values()[r * 6 + c], m);
    }
}

TEST(MaxPool2d, TieGradientGoesToFirstArgmax) {
  Tensor x = Tensor::full({1, 1, 2, 2}, 0.5, true);
  backward(sum(maxpool2d(x, 2, 2, 0)));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()),
            (std::vector<double>{1, 0, 0, 0}));
}

TEST(Bilinear, ConstantAndIdentity) {
  const Tensor c = bilinear_upsample(Tensor::full({1, 1, 3, 3}, 0.7), 3);
  for (double v : c.values()) EXPECT_NEAR(v, 0.7, 1e-15);
  const Tensor x = random_tensor({1, 2, 3, 4}, -1, 1, 19, false);
  const Tensor same = bilinear_upsample(x, 1);
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), same.values().begin()));
}

TEST(Bilinear, TwoByTwoToFourByFour) {
  // Half-pixel centres: output k samples source k/2 - 1/4, clamped to the edge.
  const Tensor y = bilinear_upsample(Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4}), 2);
  const std::array<std::array<double, 2>, 4> w{{{1, 0}, {0.75, 0.25}, {0.25, 0.75}, {0, 1}}};
  const double in[2][2] = {{1, 2}, {3, 4}};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      double expect = 0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) expect += w[r][i] * w[c][j] * in[i][j];
      EXPECT_NEAR(y.values()[r * 4 + c], expect, 1e-15) << r << "," << c;
    }
}

TEST(GlobalAvgPool, MeanAndGradient) {
  EXPECT_DOUBLE_EQ(global_avg_pool(Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4})).item(), 2.5);
  EXPECT_DOUBLE_EQ(global_avg_pool(Tensor::full({1, 1, 3, 3}, 4.0)).item(), 4.0);
  Tensor x = random_tensor({1, 1, 3, 5}, -1, 1, 20);
  backward(sum(global_avg_pool(x)));
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0 / 15.0);
}

TEST(Linear, IdentityAndZeroWeight) {
  const Tensor x = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  const Tensor y = linear(x, Tensor::from_values({2, 2}, {1, 0, 0, 1}), Tensor::zeros({2}));
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
            (std::vector<double>{1, 2, 3, 4}));
  const Tensor z = linear(x, Tensor::zeros({3, 2}), Tensor::from_values({3}, {7, 8, 9}));
  EXPECT_EQ(std::vector<double>(z.values().begin(), z.values().end()),
            (std::vector<double>{7, 8, 9, 7, 8, 9}));
}

TEST(Elementwise, SigmoidAndRelu) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_DOUBLE_EQ(relu(Tensor::scalar(-3.0)).item(), 0.0);
  Tensor x = Tensor::from_values({2}, {1000.0, -1000.0}, true);
  const Tensor s = sigmoid(x);
  EXPECT_EQ(s.values()[0], 1.0);
  EXPECT_GE(s.values()[1], 0.0);
  backward(sum(s));
  for (double g : x.grad()) EXPECT_TRUE(std::isfinite(g));
}

TEST(Backward, SumAndMeanSquare) {
  Tensor x = random_tensor({3, 4}, -2, 2, 21);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  Tensor y = random_tensor({3, 4}, -2, 2, 22);
  backward(mean(mul(y, y)));
  for (std::size_t i = 0; i < y.numel(); ++i) {
    EXPECT_NEAR(y.grad()[i], 2.0 * y.values()[i] / 12.0, 1e-15);
  }
}

TEST(Backward, RejectsNonScalarAndAccumulates) {
  Tensor x = Tensor::full({2}, 1.0, true);
  EXPECT_THROW(backward(relu(x)), std::invalid_argument);
  backward(sum(x));
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 2.0);
}

TEST(Backward, IsLinearInTheLoss) {
  auto grad_of = [](double a, double b) {
    Tensor x = random_tensor({2, 2, 4, 4}, -2, 2, 23);
    const Tensor w = random_tensor({3, 2, 3, 3}, -1, 1, 24, false);
    const Tensor l1 = mean(relu(conv2d(x, w, Tensor(), 1, 1, 1)));
    const Tensor l2 = sum(mul(x, x));
    backward(add(scalar_mul(l1, a), scalar_mul(l2, b)));
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  const auto g1 = grad_of(1, 0), g2 = grad_of(0, 1), g = grad_of(2.5, -0.5);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 2.5 * g1[i] - 0.5 * g2[i], 1e-12);
}

TEST(Tape, RecordsInputsFirstAndRunsInReverse) {
  Tensor x = Tensor::full({1}, 2.0, true);
  std::vector<int> visits;
  auto tagged = [&](const Tensor& in, int tag) {
    return Tensor::record(in.shape(), {in.values().begin(), in.values().end()}, {in},
                          [in, tag, &visits](std::span<const double>, std::span<const double> g) {
                            visits.push_back(tag);
                            Tensor t = in;
                            t.mutable_grad()[0] += g[0];
                          });
  };
  const Tensor a = tagged(x, 1);
  const Tensor b = tagged(a, 2);
  const Tensor c = tagged(add(a, b), 3);
  const Tape tape(c);
  const auto order = tape.recording_order();
  EXPECT_TRUE(std::is_sorted(order.begin(), order.end()));
  EXPECT_EQ(std::adjacent_find(order.begin(), order.end()), order.end());
  backward(c);
  EXPECT_EQ(visits, (std::vector<int>{3, 2, 1}));
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Detach, SeversTheProducer) {
  Tensor x = random_tensor({2, 2}, -1, 1, 25);
  const Tensor d = detach(x);
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), d.values().begin()));
  EXPECT_FALSE(d.requires_grad());
  backward(sum(mul(x, detach(mul(x, x)))));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(x.grad()[i], x.values()[i] * x.values()[i], 1e-15);
  }
}

TEST(Detach, TargetPathIgnoredByLoss) {
  Tensor p1 = random_tensor({1, 1, 5, 5}, 0.1, 0.9, 26);
  backward(bce(p1, detach(maxpool2d(p1, 3, 1, 1))));
  Tensor p2 = Tensor::from_values(p1.shape(), {p1.values().begin(), p1.values().end()}, true);
  const Tensor pooled = maxpool2d(detach(p2), 3, 1, 1);
  const Tensor constant =
      Tensor::from_values(p1.shape(), {pooled.values().begin(), pooled.values().end()});
  backward(bce(p2, constant));
  for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(p1.grad()[i], p2.grad()[i]);
}

class GradientCase : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradientCase, MatchesCentralDifferences) {
  const auto cases = psg::testing::gradient_cases();
  const auto& c = cases.at(GetParam());
  const auto r = c.run();
  EXPECT_GT(r.checked, 0u);
  EXPECT_LT(r.max_rel_error, psg::testing::kGradTolerance) << c.name << ": " << r.worst;
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradientCase,
                         ::testing::Range<std::size_t>(0, psg::testing::gradient_cases().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                           std::string n = psg::testing::gradient_cases()[info.param].name;
                           for (auto& ch : n) if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
                           return n;
                         });
