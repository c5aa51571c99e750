// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <vector>

#include <gtest/gtest.h>

#include "dlab/errors.hpp"
#include "dlab/models/checkpoint.hpp"
#include "dlab/models/model.hpp"
#include "support/gen.hpp"

namespace dlab {
namespace {

using testing::Gen;

const InputShape kInput{3, 8, 8};

// Parameter count of a 3x3 SmallConv spec, worked out independently of
// parameter_shapes().
std::size_t conv_param_count(const InputShape& in, const std::vector<std::size_t>& widths,
                             const std::vector<bool>& pools, std::size_t classes) {
  std::size_t total = 0, ch = in.channels, h = in.height, w = in.width;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    total += widths[i] * ch * 9 + widths[i];
    ch = widths[i];
    if (pools[i]) h /= 2, w /= 2;
  }
  return total + classes * ch * h * w + classes;
}

// Hidden layer and classifier are identities, so logits expose the
// dropout-scaled hidden activations directly.
Model probe_model(std::size_t width, double rate) {
  const ModelSpec spec = ModelSpec::mlp({1, 1, width}, {width}, width, rate);
  Tensor eye({width, width}, 0.0);
  for (std::size_t i = 0; i < width; ++i) eye[i * width + i] = 1.0;
  return Model::from_parameters(spec, {eye, Tensor({width}, 0.0), eye, Tensor({width}, 0.0)});
}

TEST(Model, SameSeedSameParameters) {
  const ModelSpec spec = ModelSpec::student(kInput, 10);
  Rng a(5, Stream::WeightInit), b(5, Stream::WeightInit), c(6, Stream::WeightInit);
  const Model m1 = Model::init(spec, a), m2 = Model::init(spec, b), m3 = Model::init(spec, c);
  EXPECT_TRUE(m1.identical(m2));
  EXPECT_FALSE(m1.identical(m3));
}

TEST(Model, PresetSizes) {
  const Model student = [] {
    Rng r(1, Stream::WeightInit);
    return Model::init(ModelSpec::student(kInput, 10), r);
  }();
  const Model teacher = [] {
    Rng r(1, Stream::WeightInit);
    return Model::init(ModelSpec::teacher(kInput, 10, 0.3), r);
  }();
  const std::size_t s = conv_param_count(kInput, {16, 48}, {true, true}, 10);
  const std::size_t t = conv_param_count(kInput, {24, 32, 48, 48}, {true, false, true, false}, 10);
  EXPECT_EQ(student.parameter_count(), s);
  EXPECT_EQ(teacher.parameter_count(), t);
  EXPECT_GT(t, 3 * s);
}

TEST(Model, InitialisationScales) {
  Rng r(2, Stream::WeightInit);
  const Model m = Model::init(ModelSpec::mlp({1, 1, 400}, {300}, 200), r);
  auto var = [](const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return s / static_cast<double>(t.size());
  };
  EXPECT_NEAR(var(m.parameters()[0]), 2.0 / 400.0, 0.05 * 2.0 / 400.0);
  EXPECT_NEAR(var(m.parameters()[2]), 1.0 / 300.0, 0.05 * 1.0 / 300.0);
  for (double b : m.parameters()[1].data()) EXPECT_EQ(b, 0.0);
}

TEST(Model, DegenerateSpecsRejected) {
  Rng r(1, Stream::WeightInit);
  ModelSpec zero = ModelSpec::student(kInput, 10);
  zero.widths[1] = 0;
  EXPECT_THROW(Model::init(zero, r), ConfigError);
  ModelSpec rate = ModelSpec::teacher(kInput, 10, 1.0);
  EXPECT_THROW(Model::init(rate, r), ConfigError);
  ModelSpec pools = ModelSpec::student(kInput, 10);
  pools.pool_after.pop_back();
  EXPECT_THROW(Model::init(pools, r), ConfigError);
  ModelSpec tiny = ModelSpec::student({3, 2, 2}, 10);
  EXPECT_THROW(Model::init(tiny, r), ConfigError);
  EXPECT_THROW(Model::init(ModelSpec::mlp(kInput, {8, 0}, 3), r), ConfigError);
}

TEST(Model, ForwardRejectsWrongInputShape) {
  Rng r(1, Stream::WeightInit);
  const Model m = Model::init(ModelSpec::student(kInput, 10), r);
  EXPECT_THROW(predict_logits(m, Tensor({2, 3, 7, 8}), DropoutMode::Inactive, r), ShapeError);
  EXPECT_THROW(predict_logits(m, Tensor({2, 1, 8, 8}), DropoutMode::Inactive, r), ShapeError);
}

TEST(Model, InactiveForwardIsPure) {
  Gen gen(3);
  Rng r(1, Stream::WeightInit);
  const Model m = Model::init(ModelSpec::teacher(kInput, 10, 0.5), r);
  const Tensor x = gen.uniform_tensor({4, 3, 8, 8}, 0.0, 1.0);
  Rng d(1, Stream::Dropout);
  const Tensor first = predict_logits(m, x, DropoutMode::Inactive, d);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(predict_logits(m, x, DropoutMode::Inactive, d).identical(first));
  EXPECT_EQ(d.counter(), 0u);
}

TEST(Model, ZeroRateActiveEqualsInactive) {
  Gen gen(4);
  Rng r(1, Stream::WeightInit);
  const Model m = Model::init(ModelSpec::teacher(kInput, 10, 0.0), r);
  const Tensor x = gen.uniform_tensor({3, 3, 8, 8}, 0.0, 1.0);
  Rng d(1, Stream::Dropout);
  EXPECT_TRUE(predict_logits(m, x, DropoutMode::Active, d)
                  .identical(predict_logits(m, x, DropoutMode::Inactive, d)));
  EXPECT_EQ(d.counter(), 0u);
}

TEST(Model, ActiveDropoutVariesAcrossCalls) {
  Gen gen(5);
  Rng r(1, Stream::WeightInit);
  const Model m = Model::init(ModelSpec::teacher(kInput, 10, 0.5), r);
  const Tensor x = gen.uniform_tensor({1, 3, 8, 8}, 0.0, 1.0);
  Rng d(1, Stream::Dropout);
  Tensor prev = predict_logits(m, x, DropoutMode::Active, d);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor next = predict_logits(m, x, DropoutMode::Active, d);
    EXPECT_FALSE(next.identical(prev));
    prev = next;
  }
}

TEST(Model, InvertedDropoutIsUnbiased) {
  const std::size_t width = 8;
  const Model m = probe_model(width, 0.5);
  Tensor x({1, 1, 1, width});
  for (std::size_t i = 0; i < width; ++i) x[i] = 0.5 + 0.1 * static_cast<double>(i);
  Rng d(9, Stream::Dropout);
  const Tensor ref = predict_logits(m, x, DropoutMode::Inactive, d);
  const int n = 1000;
  std::vector<double> s(width, 0.0), ss(width, 0.0);
  for (int k = 0; k < n; ++k) {
    const Tensor y = predict_logits(m, x, DropoutMode::Active, d);
    for (std::size_t j = 0; j < width; ++j) {
      s[j] += y[j];
      ss[j] += y[j] * y[j];
    }
  }
  for (std::size_t j = 0; j < width; ++j) {
    const double mean = s[j] / n;
    const double sd = std::sqrt((ss[j] - n * mean * mean) / (n - 1));
    EXPECT_NEAR(mean, ref[j], 3.0 * sd / std::sqrt(n)) << "unit " << j;
  }
}

TEST(Model, DropFrequencyMatchesRate) {
  const std::size_t width = 50;
  for (double p : {0.1, 0.3, 0.5}) {
    const Model m = probe_model(width, p);
    const Tensor x({200, 1, 1, width}, 1.0);
    Rng d(10, Stream::Dropout);
    const Tensor y = predict_logits(m, x, DropoutMode::Active, d);
    std::size_t zeros = 0;
    for (double v : y.data()) {
      if (v == 0.0) {
        ++zeros;
      } else {
        EXPECT_DOUBLE_EQ(v, 1.0 / (1.0 - p));
      }
    }
    const double n = static_cast<double>(y.size());
    EXPECT_NEAR(zeros / n, p, 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(Model, ConsecutiveMasksUncorrelated) {
  const std::size_t width = 64;
  const Model m = probe_model(width, 0.5);
  const Tensor x({100, 1, 1, width}, 1.0);
  Rng d(11, Stream::Dropout);
  const Tensor a = predict_logits(m, x, DropoutMode::Active, d);
  const Tensor b = predict_logits(m, x, DropoutMode::Active, d);
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double u = a[i] > 0, v = b[i] > 0;
    sa += u, sb += v, sab += u * v, saa += u * u, sbb += v * v;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(n));
}

TEST(Model, BatchedLogitsIndependentOfChunkingAndThreads) {
  Gen gen(6);
  Rng r(1, Stream::WeightInit);
  const Model m = Model::init(ModelSpec::student(kInput, 10), r);
  const Tensor x = gen.uniform_tensor({37, 3, 8, 8}, 0.0, 1.0);
  Rng d(1, Stream::Dropout);
  const Tensor whole = predict_logits(m, x, DropoutMode::Inactive, d);
  for (std::size_t batch : {1, 5, 16, 256}) {
    for (std::size_t threads : {1, 3}) {
      EXPECT_TRUE(batched_logits(m, x, batch, threads).identical(whole));
    }
  }
}

TEST(Model, EvaluationThreadsHonoursEnvironment) {
  ::setenv("DISTILL_LAB_THREADS", "2", 1);
  EXPECT_EQ(evaluation_threads(0), 2u);
  EXPECT_EQ(evaluation_threads(1), 1u);
  ::setenv("DISTILL_LAB_THREADS", "1", 1);
  EXPECT_EQ(evaluation_threads(8), 1u);
  ::unsetenv("DISTILL_LAB_THREADS");
  EXPECT_GE(evaluation_threads(0), 1u);
}

TEST(Model, ParallelChunksPropagatesExceptions) {
  EXPECT_THROW(parallel_chunks(8, 3,
                               [](std::size_t c) {
                                 if (c == 5) throw DataError("boom");
                               }),
               DataError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng r(4, Stream::WeightInit);
  for (const ModelSpec& spec : {ModelSpec::student(kInput, 10), ModelSpec::teacher(kInput, 7, 0.3),
                                ModelSpec::mlp({1, 4, 4}, {5, 6}, 3, 0.2)}) {
    const Model m = Model::init(spec, r);
    const Model back = decode_checkpoint(encode_checkpoint(m));
    EXPECT_EQ(back.spec(), m.spec());
    EXPECT_TRUE(back.identical(m));
  }
}

TEST(Checkpoint, CorruptInputsRejected) {
  Rng r(4, Stream::WeightInit);
  const std::vector<std::uint8_t> good = encode_checkpoint(Model::init(ModelSpec::student(kInput, 10), r));
  std::vector<std::uint8_t> bad_magic = good;
  bad_magic[0] ^= 0xFF;
  EXPECT_THROW(decode_checkpoint(bad_magic), DataError);
  std::vector<std::uint8_t> bad_version = good;
  bad_version[4] = 99;
  EXPECT_THROW(decode_checkpoint(bad_version), DataError);
  EXPECT_THROW(decode_checkpoint({good.begin(), good.end() - 3}), DataError);
  std::vector<std::uint8_t> trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.dlck"), DataError);
}

TEST(Checkpoint, FileRoundTrip) {
  Rng r(8, Stream::WeightInit);
  const Model m = Model::init(ModelSpec::teacher(kInput, 10, 0.1), r);
  const std::string path = ::testing::TempDir() + "/model.dlck";
  save_checkpoint(path, m);
  EXPECT_TRUE(load_checkpoint(path).identical(m));
}

}  // namespace
}  // namespace dlab
