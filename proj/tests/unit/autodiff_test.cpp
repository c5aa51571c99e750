// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "dlab/autodiff/losses.hpp"
#include "dlab/autodiff/ops.hpp"
#include "dlab/autodiff/optim.hpp"
#include "dlab/autodiff/rng.hpp"
#include "dlab/distill/losses.hpp"
#include "dlab/errors.hpp"
#include "support/gen.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace dlab {
namespace {

using testing::check_gradients;
using testing::Gen;

// Reduces a tensor-valued op to a scalar with fixed random weights so every
// output element contributes a distinct slope.
Var project(Var y, const Tensor& weights) {
  return sum(mul(y, y.tape().constant(weights)));
}

TEST(Softmax, UniformLogitsGiveUniformRow) {
  for (double tau : {0.5, 1.0, 4.0}) {
    const Tensor p = softmax_temperature(Tensor({1, 4}, 1.0), tau);
    for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 0.25);
  }
}

TEST(Softmax, TwoClassClosedForm) {
  const Tensor p = softmax_temperature(Tensor({1, 2}, {2.0, 0.0}), 1.0);
  const double e = std::exp(2.0);
  EXPECT_NEAR(p[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(p[0], 0.8808, 1e-4);
  EXPECT_NEAR(p[1], 0.1192, 1e-4);
}

TEST(Softmax, TemperatureFlattens) {
  const Tensor sharp = softmax_temperature(Tensor({1, 2}, {2.0, 0.0}), 1.0);
  const Tensor soft = softmax_temperature(Tensor({1, 2}, {2.0, 0.0}), 4.0);
  EXPECT_LT(soft[0], sharp[0]);
  EXPECT_GT(soft[0], 0.5);
}

TEST(Softmax, RejectsBadTemperatureAndNaN) {
  EXPECT_THROW(softmax_temperature(Tensor({1, 2}, 0.0), 0.0), ConfigError);
  EXPECT_THROW(softmax_temperature(Tensor({1, 2}, 0.0), -1.0), ConfigError);
  EXPECT_THROW(softmax_temperature(Tensor({1, 2}, {std::nan(""), 0.0}), 1.0), NumericError);
}

TEST(Softmax, RowsSumToOneAtLargeMagnitude) {
  Gen gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = gen.size(1, 6), c = gen.size(2, 12);
    const Tensor z = gen.uniform_tensor({b, c}, -1e3, 1e3);
    const Tensor p = softmax_temperature(z, gen.uniform(0.1, 10.0));
    for (std::size_t i = 0; i < b; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        ASSERT_GE(p[i * c + j], 0.0);
        total += p[i * c + j];
      }
      ASSERT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, ArgmaxInvariantToTemperature) {
  Gen gen(12);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor z = gen.tensor({4, 7}, 3.0);
    const auto ref = argmax_rows(z);
    for (double tau : {0.3, 1.0, 4.0, 20.0}) {
      EXPECT_EQ(argmax_rows(softmax_temperature(z, tau)), ref);
    }
  }
}

TEST(CrossEntropy, UniformPredictionIsLogC) {
  Tape tape;
  const std::vector<Label> y = {3, 7};
  const Var loss = cross_entropy(tape.constant(Tensor({2, 10}, 0.5)), y);
  EXPECT_NEAR(loss.value().item(), std::log(10.0), 1e-12);
  EXPECT_NEAR(loss.value().item(), 2.302585, 1e-6);
}

TEST(CrossEntropy, ConfidentCorrectIsNearZero) {
  Tensor z({1, 5}, 0.0);
  z[2] = 30.0;
  Tape tape;
  const std::vector<Label> y = {2};
  const double loss = cross_entropy(tape.constant(z), y).value().item();
  EXPECT_GE(loss, 0.0);
  EXPECT_LT(loss, 1e-12);
}

TEST(CrossEntropy, RejectsOutOfRangeLabel) {
  Tape tape;
  const Var z = tape.constant(Tensor({2, 3}, 0.0));
  EXPECT_THROW(cross_entropy(z, std::vector<Label>{0, 3}), ConfigError);
  EXPECT_THROW(cross_entropy(z, std::vector<Label>{-1, 0}), ConfigError);
  EXPECT_THROW(cross_entropy(z, std::vector<Label>{0}), ShapeError);
}

TEST(CrossEntropy, MatchesOracleAndFiniteDifferences) {
  Gen gen(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor z = gen.tensor({4, 5}, 2.0);
    const std::vector<Label> y = gen.labels(4, 5);
    Tape tape;
    EXPECT_NEAR(cross_entropy(tape.constant(z), y).value().item(),
                static_cast<double>(testing::oracle_cross_entropy(z, y)), 1e-13);
    const auto fd = check_gradients(
        [&](Tape&, const std::vector<Var>& v) { return cross_entropy(v[0], y); }, {z});
    EXPECT_LT(fd.max_rel_error, 1e-6);
  }
}

TEST(KlDivergence, IdenticalDistributionsGiveZero) {
  Gen gen(14);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor z = gen.tensor({3, 6});
    Tape tape;
    const Tensor p = softmax_temperature(z, 2.0);
    const double kl = kl_divergence(p, log_softmax(tape.constant(z), 2.0)).value().item();
    EXPECT_NEAR(kl, 0.0, 1e-12);
  }
}

TEST(KlDivergence, PointMassAgainstUniformIsLog2) {
  Tape tape;
  const Var logq = tape.constant(Tensor({1, 2}, std::log(0.5)));
  const double kl = kl_divergence(Tensor({1, 2}, {1.0, 0.0}), logq).value().item();
  EXPECT_NEAR(kl, std::log(2.0), 1e-15);
  EXPECT_NEAR(kl, 0.693147, 1e-6);
}

TEST(KlDivergence, RejectsMalformedDistributions) {
  Tape tape;
  const Var logq = tape.constant(Tensor({1, 2}, std::log(0.5)));
  EXPECT_THROW(kl_divergence(Tensor({1, 2}, {0.7, 0.4}), logq), ConfigError);
  EXPECT_THROW(kl_divergence(Tensor({1, 2}, {-0.1, 1.1}), logq), ConfigError);
  const Var bad_q = tape.constant(Tensor({1, 2}, std::log(0.4)));
  EXPECT_THROW(kl_divergence(Tensor({1, 2}, {0.5, 0.5}), bad_q), ConfigError);
}

TEST(KlDivergence, NonNegativeOnRandomSimplexPairs) {
  Gen gen(15);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t b = gen.size(1, 4), c = gen.size(2, 8);
    const Tensor p = gen.simplex(b, c);
    const Tensor q = gen.simplex(b, c, false);
    Tensor logq = q;
    for (double& v : logq.data()) v = std::log(v);
    Tape tape;
    EXPECT_GE(kl_divergence(p, tape.constant(logq)).value().item(), -1e-15);
  }
}

TEST(KlDivergence, GradientThroughLogSoftmax) {
  Gen gen(16);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor target = gen.simplex(3, 4);
    const double tau = gen.uniform(0.5, 5.0);
    const auto fd = check_gradients(
        [&](Tape&, const std::vector<Var>& v) {
          return kl_divergence(target, log_softmax(v[0], tau));
        },
        {gen.tensor({3, 4}, 2.0)});
    EXPECT_LT(fd.max_rel_error, 1e-6);
  }
}

TEST(Primitives, LinearIdentity) {
  Gen gen(17);
  const Tensor x = gen.tensor({3, 4});
  Tensor w({4, 4}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
  Tape tape;
  const Var y = linear(tape.constant(x), tape.constant(w), tape.constant(Tensor({4}, 0.0)));
  EXPECT_TRUE(y.value().identical(x));
}

TEST(Primitives, UnitConvolutionIsIdentity) {
  Gen gen(18);
  const Tensor x = gen.tensor({2, 1, 5, 6});
  Tape tape;
  const Var y = conv2d(tape.constant(x), tape.constant(Tensor({1, 1, 1, 1}, 1.0)),
                       tape.constant(Tensor({1}, 0.0)), 0);
  EXPECT_TRUE(y.value().identical(x));
}

TEST(Primitives, ShapeMismatchesThrow) {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}));
  const Var b = tape.constant(Tensor({3, 2}));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(mul(a, b), ShapeError);
  EXPECT_THROW(linear(a, tape.constant(Tensor({4, 2})), tape.constant(Tensor({4}))), ShapeError);
  EXPECT_THROW(conv2d(tape.constant(Tensor({1, 2, 4, 4})), tape.constant(Tensor({1, 3, 3, 3})),
                      tape.constant(Tensor({1})), 1),
               ShapeError);
  EXPECT_THROW(avg_pool2d(a, 2), ShapeError);
  EXPECT_THROW(apply_mask(a, Tensor({2, 2})), ShapeError);
}

TEST(Primitives, FiniteDifferenceChecks) {
  Gen gen(19);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t b = gen.size(1, 3);
    const Tensor r2 = gen.tensor({b, 4});
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) { return project(add(v[0], v[1]), r2); },
                  {gen.tensor({b, 4}), gen.tensor({b, 4})})
                  .max_rel_error,
              1e-5);
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) { return project(mul(v[0], v[1]), r2); },
                  {gen.tensor({b, 4}), gen.tensor({b, 4})})
                  .max_rel_error,
              1e-5);
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) { return project(scale(v[0], -1.7), r2); },
                  {gen.tensor({b, 4})})
                  .max_rel_error,
              1e-5);
    const Tensor r3 = gen.tensor({b, 3});
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) {
                    return project(linear(v[0], v[1], v[2]), r3);
                  },
                  {gen.tensor({b, 5}), gen.tensor({3, 5}), gen.tensor({3})})
                  .max_rel_error,
              1e-5);
    const Tensor rc = gen.tensor({b, 2, 4, 5});
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) {
                    return project(conv2d(v[0], v[1], v[2], 1), rc);
                  },
                  {gen.tensor({b, 3, 4, 5}), gen.tensor({2, 3, 3, 3}), gen.tensor({2})})
                  .max_rel_error,
              1e-5);
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) { return project(relu(v[0]), r2); },
                  {gen.away_from_zero({b, 4}, 1e-3)})
                  .max_rel_error,
              1e-5);
    const Tensor rp = gen.tensor({b, 2, 2, 2});
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) { return project(avg_pool2d(v[0], 2), rp); },
                  {gen.tensor({b, 2, 5, 4})})
                  .max_rel_error,
              1e-5);
    const Tensor rf = gen.tensor({b, 12});
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) { return project(flatten(v[0]), rf); },
                  {gen.tensor({b, 3, 2, 2})})
                  .max_rel_error,
              1e-5);
    Tensor mask({b, 4});
    for (double& m : mask.data()) m = gen.uniform() < 0.5 ? 0.0 : 2.0;
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) { return project(apply_mask(v[0], mask), r2); },
                  {gen.tensor({b, 4})})
                  .max_rel_error,
              1e-5);
    EXPECT_LT(check_gradients(
                  [&](Tape&, const std::vector<Var>& v) { return project(log_softmax(v[0], 3.0), r2); },
                  {gen.tensor({b, 4})})
                  .max_rel_error,
              1e-5);
  }
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  Gen gen(20);
  const Var p = tape.variable(gen.tensor({3, 4}));
  tape.backward(sum(p));
  const Tensor g = tape.grad(p);
  for (double v : g.data()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, HalfSquaredNormGivesParams) {
  Tape tape;
  Gen gen(21);
  const Tensor v = gen.tensor({5});
  const Var p = tape.variable(v);
  tape.backward(scale(sum(mul(p, p)), 0.5));
  EXPECT_TRUE(tape.grad(p).identical(v));
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape tape;
  const Var p = tape.variable(Tensor({2}, 1.0));
  EXPECT_THROW(tape.backward(p), ShapeError);
}

TEST(Backward, ConstantsReceiveNoGradient) {
  Tape tape;
  const Var c = tape.constant(Tensor({2}, 3.0));
  const Var p = tape.variable(Tensor({2}, 1.0));
  tape.backward(sum(mul(c, p)));
  EXPECT_FALSE(c.requires_grad());
  const Tensor g = tape.grad(c);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, RepeatedBackwardIsDeterministic) {
  Gen gen(22);
  const Tensor x = gen.tensor({4, 6}), w = gen.tensor({3, 6}), bias = gen.tensor({3});
  const std::vector<Label> y = gen.labels(4, 3);
  Tensor first;
  for (int rep = 0; rep < 3; ++rep) {
    Tape tape;
    const Var wv = tape.variable(w);
    tape.backward(cross_entropy(linear(tape.constant(x), wv, tape.variable(bias)), y));
    if (rep == 0) first = tape.grad(wv);
    EXPECT_TRUE(tape.grad(wv).identical(first));
  }
}

TEST(Backward, CompositeDistillationLoss) {
  Gen gen(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor teacher = gen.tensor({3, 5}, 2.0);
    const std::vector<Label> y = gen.labels(3, 5);
    const auto fd = check_gradients(
        [&](Tape&, const std::vector<Var>& v) {
          return hinton_loss(v[0], teacher, y, 0.9, 4.0).total;
        },
        {gen.tensor({3, 5}, 2.0)});
    EXPECT_LT(fd.max_rel_error, 1e-5);
  }
}

TEST(Sgd, ZeroMomentumIsPlainSgd) {
  std::vector<Tensor> p{Tensor({2}, {1.0, -2.0})};
  const std::vector<Tensor> g{Tensor({2}, {0.5, 0.25})};
  std::vector<Tensor> v{Tensor({2}, 0.0)};
  sgd_momentum_step(p, g, v, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(p[0][0], 1.0 - 0.05);
  EXPECT_DOUBLE_EQ(p[0][1], -2.0 - 0.025);
}

TEST(Sgd, TwoStepRecurrence) {
  std::vector<Tensor> p{Tensor({1}, 0.0)};
  const std::vector<Tensor> g{Tensor({1}, 1.0)};
  std::vector<Tensor> v{Tensor({1}, 0.0)};
  sgd_momentum_step(p, g, v, 0.1, 0.9);
  EXPECT_NEAR(p[0][0], -0.1, 1e-15);
  sgd_momentum_step(p, g, v, 0.1, 0.9);
  EXPECT_NEAR(p[0][0], -0.29, 1e-15);
  EXPECT_NEAR(v[0][0], 1.9, 1e-15);
}

TEST(Sgd, ZeroGradientDecaysVelocityOnly) {
  std::vector<Tensor> p{Tensor({2}, {3.0, 4.0})};
  const std::vector<Tensor> g{Tensor({2}, 0.0)};
  std::vector<Tensor> v{Tensor({2}, {1.0, -1.0})};
  sgd_momentum_step(p, g, v, 0.1, 0.9);
  EXPECT_DOUBLE_EQ(v[0][0], 0.9);
  EXPECT_DOUBLE_EQ(v[0][1], -0.9);
  EXPECT_DOUBLE_EQ(p[0][0], 3.0 - 0.1 * 0.9);

  std::vector<Tensor> q{Tensor({2}, {3.0, 4.0})};
  std::vector<Tensor> zero{Tensor({2}, 0.0)};
  sgd_momentum_step(q, g, zero, 0.1, 0.9);
  EXPECT_TRUE(q[0].identical(Tensor({2}, {3.0, 4.0})));
}

TEST(Sgd, ValidatesArguments) {
  std::vector<Tensor> p{Tensor({2})};
  std::vector<Tensor> v{Tensor({2})};
  const std::vector<Tensor> g{Tensor({2})};
  const std::vector<Tensor> bad{Tensor({3})};
  EXPECT_THROW(sgd_momentum_step(p, bad, v, 0.1, 0.9), ShapeError);
  EXPECT_THROW(sgd_momentum_step(p, g, v, 0.0, 0.9), ConfigError);
  EXPECT_THROW(sgd_momentum_step(p, g, v, 0.1, 1.0), ConfigError);
  EXPECT_THROW(sgd_momentum_step(p, g, v, 0.1, -0.1), ConfigError);
}

TEST(Tensor, InvariantsAreChecked) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0}), ShapeError);
  Tensor t({2}, {1.0, INFINITY});
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.require_finite("t"), NumericError);
}

TEST(Rng, SameSeedAndStreamReplay) {
  Rng a(7, Stream::Dropout), b(7, Stream::Dropout);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsAreIndependent) {
  std::set<std::uint64_t> firsts;
  for (Stream s : {Stream::DataShuffle, Stream::Dropout, Stream::GaussianNoise, Stream::McLabels,
                   Stream::PgdInit, Stream::WeightInit}) {
    Rng r(7, s);
    firsts.insert(r.next_u64());
  }
  EXPECT_EQ(firsts.size(), 6u);

  // Drawing from one stream leaves another untouched.
  Rng noise(7, Stream::GaussianNoise), labels(7, Stream::McLabels);
  const std::uint64_t expected = Rng(7, Stream::McLabels).next_u64();
  for (int i = 0; i < 10; ++i) noise.normal();
  EXPECT_EQ(labels.next_u64(), expected);
}

TEST(Rng, ForkDoesNotAdvanceParent) {
  Rng r(3, Stream::PgdInit);
  const Rng copy = r;
  const Rng child = r.fork(5);
  EXPECT_EQ(r.counter(), copy.counter());
  EXPECT_NE(Rng(r.fork(5)).next_u64(), Rng(r.fork(6)).next_u64());
  EXPECT_EQ(Rng(child).next_u64(), Rng(r.fork(5)).next_u64());
}

TEST(Rng, UniformIntAndNormalMoments) {
  Rng r(9, Stream::DataGen);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[r.uniform_int(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));

  double s = 0.0, ss = 0.0;
  const std::uint64_t before = r.counter();
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
  }
  EXPECT_EQ(r.counter() - before, 2u * n);
  EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(ss / n, 1.0, 0.03);
}

}  // namespace
}  // namespace dlab
