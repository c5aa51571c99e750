// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <vector>

#include <gtest/gtest.h>

#include "dlab/autodiff/ops.hpp"
#include "dlab/data/synthetic.hpp"
#include "dlab/distill/losses.hpp"
#include "dlab/distill/schedule.hpp"
#include "dlab/distill/trainer.hpp"
#include "dlab/errors.hpp"
#include "support/gen.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace dlab {
namespace {

using testing::Gen;

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

double loss_value(const Tensor& s, const Tensor& t, const std::vector<Label>& y, double alpha,
                  double tau) {
  Tape tape;
  return hinton_loss(tape.constant(s), t, y, alpha, tau).total.value().item();
}

TEST(HintonLoss, AlphaZeroIsCrossEntropyBitExact) {
  Gen gen(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor s = gen.tensor({4, 6}, 3.0), t = gen.tensor({4, 6}, 3.0);
    const std::vector<Label> y = gen.labels(4, 6);
    Tape tape;
    const double ce = cross_entropy(tape.constant(s), y).value().item();
    EXPECT_TRUE(same_bits(loss_value(s, t, y, 0.0, 4.0), ce));
  }
}

TEST(HintonLoss, AlphaOneIdenticalLogitsIsZero) {
  Gen gen(2);
  const Tensor s = gen.tensor({3, 5});
  EXPECT_NEAR(loss_value(s, s, gen.labels(3, 5), 1.0, 4.0), 0.0, 1e-12);
}

TEST(HintonLoss, MatchesOracle) {
  Gen gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor s = gen.tensor({2, 3}, 2.0), t = gen.tensor({2, 3}, 2.0);
    const std::vector<Label> y = gen.labels(2, 3);
    const double oracle = static_cast<double>(testing::oracle_distill_loss(s, t, y, 0.9L, 4.0L));
    EXPECT_NEAR(loss_value(s, t, y, 0.9, 4.0), oracle, 1e-12);
  }
}

TEST(HintonLoss, AffineInAlpha) {
  Gen gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor s = gen.tensor({3, 4}), t = gen.tensor({3, 4});
    const std::vector<Label> y = gen.labels(3, 4);
    const double l0 = loss_value(s, t, y, 0.0, 4.0);
    const double l1 = loss_value(s, t, y, 1.0, 4.0);
    const double a = gen.uniform();
    EXPECT_NEAR(loss_value(s, t, y, a, 4.0), (1 - a) * l0 + a * l1, 1e-12);
  }
}

TEST(HintonLoss, TemperatureSquaredFactor) {
  Gen gen(5);
  const Tensor s = gen.tensor({3, 4}), t = gen.tensor({3, 4});
  const std::vector<Label> y = gen.labels(3, 4);
  for (double tau : {1.0, 4.0}) {
    Tape tape;
    const DistillLoss l = hinton_loss(tape.constant(s), t, y, 0.9, tau);
    const double kl_part = l.total.value().item() - 0.1 * l.ce.value().item();
    EXPECT_NEAR(kl_part, 0.9 * tau * tau * l.kl.value().item(), 1e-12);
  }
}

TEST(HintonLoss, StudentGradientAndConstantTeacher) {
  Gen gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor t = gen.tensor({3, 5}, 2.0);
    const std::vector<Label> y = gen.labels(3, 5);
    const auto fd = testing::check_gradients(
        [&](Tape&, const std::vector<Var>& v) { return hinton_loss(v[0], t, y, 0.9, 4.0).total; },
        {gen.tensor({3, 5}, 2.0)});
    EXPECT_LT(fd.max_rel_error, 1e-6);
  }
  // Teacher logits produced on the same tape still receive nothing.
  Tape tape;
  const Var teacher = tape.variable(gen.tensor({2, 3}));
  const Var student = tape.variable(gen.tensor({2, 3}));
  const Tensor teacher_logits = teacher.value();
  tape.backward(hinton_loss(student, teacher_logits, gen.labels(2, 3), 0.9, 4.0).total);
  const Tensor g = tape.grad(teacher);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(HintonLoss, RejectsBadArguments) {
  Tape tape;
  const Var s = tape.constant(Tensor({2, 3}));
  const std::vector<Label> y = {0, 1};
  EXPECT_THROW(hinton_loss(s, Tensor({2, 4}), y, 0.9, 4.0), ShapeError);
  EXPECT_THROW(hinton_loss(s, Tensor({2, 3}), y, 1.1, 4.0), ConfigError);
  EXPECT_THROW(hinton_loss(s, Tensor({2, 3}), y, -0.1, 4.0), ConfigError);
  EXPECT_THROW(hinton_loss(s, Tensor({2, 3}), y, 0.5, 0.0), ConfigError);
}

TEST(SrLoss, ZeroNoiseMatchesHinton) {
  Gen gen(7);
  Rng noise(1, Stream::GaussianNoise);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor s = gen.tensor({3, 4}), t = gen.tensor({3, 4});
    const std::vector<Label> y = gen.labels(3, 4);
    Tape tape;
    const double sr = sr_loss(tape.constant(s), t, y, 0.9, 4.0).total.value().item();
    EXPECT_TRUE(same_bits(sr, loss_value(s, t, y, 0.9, 4.0)));
  }
}

TEST(SrLoss, MatchesOracleAndZeroAtMatchedDistributions) {
  Gen gen(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor s = gen.tensor({2, 3}, 2.0), t = gen.tensor({2, 3}, 2.0);
    const std::vector<Label> y = gen.labels(2, 3);
    Tape tape;
    const double sr = sr_loss(tape.constant(s), t, y, 0.9, 4.0).total.value().item();
    EXPECT_NEAR(sr, static_cast<double>(testing::oracle_distill_loss(s, t, y, 0.9L, 4.0L)), 1e-12);
  }
  const Tensor t = gen.tensor({2, 3});
  Tensor shifted = t;
  for (double& v : shifted.data()) v += 5.0;
  Tape tape;
  EXPECT_NEAR(sr_loss(tape.constant(shifted), t, gen.labels(2, 3), 1.0, 4.0).total.value().item(),
              0.0, 1e-12);
}

TEST(MessyCollaboration, ZeroRateIsIdentity) {
  Gen gen(9);
  const std::vector<Label> y = gen.labels(1000, 10);
  Rng r(1, Stream::McLabels);
  EXPECT_EQ(mc_corrupt_labels(y, 0.0, 10, r), y);
}

TEST(MessyCollaboration, FullRateChangesNineTenths) {
  Gen gen(10);
  const std::size_t n = 10000;
  const std::vector<Label> y = gen.labels(n, 10);
  Rng r(2, Stream::McLabels);
  const std::vector<Label> out = mc_corrupt_labels(y, 1.0, 10, r);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < n; ++i) changed += out[i] != y[i];
  const double p = 0.9;
  EXPECT_NEAR(static_cast<double>(changed), n * p, 3.0 * std::sqrt(n * p * (1 - p)));
}

TEST(MessyCollaboration, FreshPatternEachCall) {
  Gen gen(11);
  const std::vector<Label> y = gen.labels(200, 10);
  Rng r(3, Stream::McLabels);
  const auto a = mc_corrupt_labels(y, 0.5, 10, r);
  const auto b = mc_corrupt_labels(y, 0.5, 10, r);
  EXPECT_NE(a, b);
}

TEST(MessyCollaboration, PerClassMarginalPassesChiSquare) {
  // chi-square critical value, 9 degrees of freedom, upper tail 0.001.
  const double critical = 27.877;
  const std::size_t classes = 10, n = 100000;
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<Label>(i % classes);
  for (double rate : {0.25, 0.5, 1.0}) {
    Rng r(4, Stream::McLabels);
    const std::vector<Label> out = mc_corrupt_labels(y, rate, classes, r);
    std::vector<std::vector<double>> counts(classes, std::vector<double>(classes, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_GE(out[i], 0);
      ASSERT_LT(static_cast<std::size_t>(out[i]), classes);
      counts[y[i]][out[i]] += 1;
    }
    const double per_class = static_cast<double>(n / classes);
    for (std::size_t k = 0; k < classes; ++k) {
      double chi2 = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        const double p = (j == k ? 1.0 - rate : 0.0) + rate / classes;
        const double e = per_class * p;
        chi2 += (counts[k][j] - e) * (counts[k][j] - e) / e;
      }
      EXPECT_LT(chi2, critical) << "rate " << rate << " class " << k;
    }
  }
}

TEST(MessyCollaboration, RejectsBadRate) {
  Rng r(1, Stream::McLabels);
  const std::vector<Label> y = {0, 1};
  EXPECT_THROW(mc_corrupt_labels(y, -0.1, 2, r), ConfigError);
  EXPECT_THROW(mc_corrupt_labels(y, 1.1, 2, r), ConfigError);
}

TEST(Schedule, StandardValues) {
  const ScheduleSpec s = ScheduleSpec::standard();
  EXPECT_DOUBLE_EQ(lr_at(s, 0), 0.1);
  EXPECT_DOUBLE_EQ(lr_at(s, 59), 0.1);
  EXPECT_NEAR(lr_at(s, 60), 0.02, 1e-15);
  EXPECT_NEAR(lr_at(s, 120), 0.004, 1e-15);
  EXPECT_NEAR(lr_at(s, 150), 0.0008, 1e-15);
  EXPECT_NEAR(lr_at(s, 199), 0.0008, 1e-15);
  EXPECT_THROW(lr_at(s, 200), ConfigError);
}

TEST(Schedule, FickleTeacherSchedules) {
  const ScheduleSpec ft4 = *ft_extended_schedule(0.4);
  EXPECT_EQ(ft4.total_epochs, 350u);
  EXPECT_NEAR(lr_at(ft4, 279), 0.004, 1e-15);
  EXPECT_NEAR(lr_at(ft4, 280), 0.0008, 1e-15);
  EXPECT_EQ(ft_extended_schedule(0.1)->decay_epochs, (std::vector<std::size_t>{75, 150, 200}));
  EXPECT_EQ(ft_extended_schedule(0.2)->total_epochs, 250u);
  EXPECT_EQ(ft_extended_schedule(0.3)->decay_epochs, (std::vector<std::size_t>{90, 180, 240}));
  EXPECT_EQ(ft_extended_schedule(0.5)->total_epochs, 350u);
  EXPECT_FALSE(ft_extended_schedule(0.0).has_value());
}

TEST(Schedule, DeskScaleCompression) {
  const ScheduleSpec desk = ScheduleSpec::standard().scaled(0.2);
  EXPECT_EQ(desk.total_epochs, 40u);
  EXPECT_EQ(desk.decay_epochs, (std::vector<std::size_t>{12, 24, 30}));
  EXPECT_EQ(ft_extended_schedule(0.4, 0.2)->decay_epochs, (std::vector<std::size_t>{21, 42, 56}));
  EXPECT_EQ(ft_extended_schedule(0.4, 0.2)->total_epochs, 70u);
}

TEST(Schedule, ValidationRejectsBadSpecs) {
  ScheduleSpec s;
  s.decay_epochs = {60, 60};
  EXPECT_THROW(s.validate(), ConfigError);
  s.decay_epochs = {250};
  EXPECT_THROW(s.validate(), ConfigError);
  s = ScheduleSpec{};
  s.initial_lr = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.train_per_class = 12;
    spec.test_per_class = 4;
    data_ = new SyntheticData(generate_synthetic(spec));
    Rng r(1, Stream::WeightInit);
    teacher_ = new Model(Model::init(ModelSpec::teacher(data_->train.input_shape(), 4, 0.0), r));
    Rng r2(2, Stream::WeightInit);
    ft_teacher_ = new Model(Model::init(ModelSpec::teacher(data_->train.input_shape(), 4, 0.3), r2));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete teacher_;
    delete ft_teacher_;
  }

  static Model student() {
    Rng r(7, Stream::WeightInit);
    return Model::init(ModelSpec::student(data_->train.input_shape(), 4), r);
  }
  static DistillConfig config(Method m) {
    DistillConfig c;
    c.method = m;
    c.batch_size = 16;
    c.schedule.total_epochs = 3;
    c.schedule.decay_epochs = {2};
    c.seed = 5;
    return c;
  }
  static TrainResult run(const DistillConfig& c, const Model* t) {
    return run_training(student(), t, data_->train, c, &data_->test);
  }

  static SyntheticData* data_;
  static Model* teacher_;
  static Model* ft_teacher_;
};

SyntheticData* TrainerTest::data_ = nullptr;
Model* TrainerTest::teacher_ = nullptr;
Model* TrainerTest::ft_teacher_ = nullptr;

TEST_F(TrainerTest, HintonAlphaZeroReproducesBaseline) {
  DistillConfig h = config(Method::Hinton);
  h.alpha = 0.0;
  const TrainResult a = run(config(Method::Baseline), nullptr);
  const TrainResult b = run(h, teacher_);
  EXPECT_TRUE(a.model.identical(b.model));
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    EXPECT_TRUE(same_bits(a.epochs[e].train_ce, b.epochs[e].train_ce));
  }
}

TEST_F(TrainerTest, SoftRandomizationZeroSigmaReproducesHinton) {
  DistillConfig sr = config(Method::SR);
  sr.sigma = 0.0;
  EXPECT_TRUE(run(sr, teacher_).model.identical(run(config(Method::Hinton), teacher_).model));
  sr.sigma = 0.05;
  EXPECT_FALSE(run(sr, teacher_).model.identical(run(config(Method::Hinton), teacher_).model));
}

TEST_F(TrainerTest, GaussianAugmentationZeroSigmaReproducesBaseline) {
  EXPECT_TRUE(run(config(Method::GA), nullptr).model.identical(run(config(Method::Baseline), nullptr).model));
}

TEST_F(TrainerTest, FickleTeacherWithoutDropoutReproducesHinton) {
  DistillConfig ft = config(Method::FT);
  EXPECT_TRUE(run(ft, teacher_).model.identical(run(config(Method::Hinton), teacher_).model));
  EXPECT_THROW(train(student(), teacher_, data_->train, ft), ConfigError);
}

TEST_F(TrainerTest, FickleTeacherDiffersFromStaticTeacher) {
  DistillConfig ft = config(Method::FT);
  ft.ft_extended_schedule = false;
  const TrainResult a = train(student(), ft_teacher_, data_->train, ft);
  const TrainResult b = run(config(Method::Hinton), ft_teacher_);
  EXPECT_FALSE(a.model.identical(b.model));
}

TEST_F(TrainerTest, FickleTeacherUsesExtendedSchedule) {
  DistillConfig ft = config(Method::FT);
  ft.schedule = ScheduleSpec::standard().scaled(0.2);
  const ScheduleSpec s = effective_schedule(ft, ft_teacher_);
  EXPECT_EQ(s.total_epochs, 60u);
  EXPECT_EQ(s.decay_epochs, (std::vector<std::size_t>{18, 36, 48}));
  EXPECT_EQ(effective_schedule(ft, teacher_), ft.schedule);
  EXPECT_EQ(effective_schedule(config(Method::Hinton), ft_teacher_), config(Method::Hinton).schedule);
}

TEST_F(TrainerTest, MessyCollaborationZeroRateIsIdentity) {
  DistillConfig mc = config(Method::Hinton);
  mc.mc_rate = 0.0;
  EXPECT_TRUE(run(mc, teacher_).model.identical(run(config(Method::Hinton), teacher_).model));
  mc.mc_rate = 0.5;
  EXPECT_FALSE(run(mc, teacher_).model.identical(run(config(Method::Hinton), teacher_).model));
}

TEST_F(TrainerTest, DeterministicGivenSeed) {
  DistillConfig c = config(Method::SR);
  c.sigma = 0.1;
  c.mc_rate = 0.2;
  const TrainResult a = run(c, teacher_), b = run(c, teacher_);
  EXPECT_TRUE(a.model.identical(b.model));
  c.seed = 6;
  EXPECT_FALSE(run(c, teacher_).model.identical(a.model));
}

TEST_F(TrainerTest, RecordsEpochStats) {
  const TrainResult r = run(config(Method::Hinton), teacher_);
  ASSERT_EQ(r.epochs.size(), 3u);
  EXPECT_DOUBLE_EQ(r.epochs[0].lr, 0.1);
  EXPECT_NEAR(r.epochs[2].lr, 0.02, 1e-15);
  for (const EpochStats& e : r.epochs) {
    EXPECT_GT(e.train_kl, 0.0);
    EXPECT_NEAR(e.train_loss, 0.1 * e.train_ce + 0.9 * 16.0 * e.train_kl, 1e-9);
    EXPECT_GE(e.test_accuracy, 0.0);
  }
}

TEST_F(TrainerTest, TeacherIsNeverUpdated) {
  const Model before = *teacher_;
  run(config(Method::Hinton), teacher_);
  EXPECT_TRUE(teacher_->identical(before));
}

TEST_F(TrainerTest, Preconditions) {
  EXPECT_THROW(run(config(Method::Hinton), nullptr), ConfigError);
  EXPECT_THROW(train(student(), nullptr, data_->train, config(Method::SR)), ConfigError);
  DistillConfig bad = config(Method::Baseline);
  bad.alpha = 2.0;
  EXPECT_THROW(run(bad, nullptr), ConfigError);
  Rng r(1, Stream::WeightInit);
  const Model wrong = Model::init(ModelSpec::teacher(data_->train.input_shape(), 5, 0.0), r);
  EXPECT_THROW(train(student(), &wrong, data_->train, config(Method::Hinton)), ConfigError);
}

TEST_F(TrainerTest, DivergenceRaisesNumericError) {
  DistillConfig c = config(Method::Baseline);
  c.schedule.initial_lr = 1e200;
  EXPECT_THROW(run(c, nullptr), NumericError);
}

TEST(Method, NamesRoundTrip) {
  for (Method m : {Method::Baseline, Method::Hinton, Method::FT, Method::SR, Method::GA}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW(parse_method("mc"), ConfigError);
}

}  // namespace
}  // namespace dlab
