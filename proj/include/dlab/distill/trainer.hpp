// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "dlab/data/dataset.hpp"
#include "dlab/distill/schedule.hpp"
#include "dlab/models/model.hpp"

namespace dlab {

/// GA is the lone-model Gaussian augmentation baseline: cross-entropy on
/// x + delta with no teacher.
enum class Method { Baseline, Hinton, FT, SR, GA };

std::string_view method_name(Method m);
/// Accepts the lowercase names returned by method_name.
Method parse_method(std::string_view name);
bool method_uses_teacher(Method m);

struct DistillConfig {
  Method method = Method::Baseline;
  double alpha = 0.9;
  double tau = 4.0;
  /// Input noise std for SR and GA.
  double sigma = 0.0;
  /// Messy collaboration rate; applies on top of any method.
  double mc_rate = 0.0;
  /// Dropout used when training a teacher for FT.
  double teacher_dropout_rate = 0.0;
  std::size_t batch_size = 128;
  double momentum = 0.9;
  ScheduleSpec schedule = ScheduleSpec::standard().scaled(0.2);
  /// FT switches to the longer schedule picked by the teacher's dropout
  /// rate, compressed by schedule.total_epochs / 200.
  bool ft_extended_schedule = true;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const DistillConfig&) const = default;
};

/// The schedule a run actually follows.
ScheduleSpec effective_schedule(const DistillConfig& config, const Model* teacher);

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_ce = 0.0;
  /// Raw divergence before the alpha * tau^2 factor; 0 without a teacher.
  double train_kl = 0.0;
  /// NaN when no evaluation set was given.
  double test_accuracy = 0.0;
};

struct TrainResult {
  Model model;
  ScheduleSpec schedule;
  std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Full precondition check: a teacher for Hinton/FT/SR with matching input
/// shape and class count, and a teacher trained with dropout for FT.
void validate_training_setup(const Model& student, const Model* teacher,
                             const Dataset& train, const DistillConfig& config);

/// The training loop proper. It checks only what it needs to run, so FT
/// with a dropout-free teacher is allowed here (that run is identical to
/// Hinton).
///
/// Randomness: shuffling uses Stream::DataShuffle, SR/GA noise
/// Stream::GaussianNoise, MC labels Stream::McLabels, student dropout
/// Rng(seed, Dropout).fork(0) and FT teacher dropout .fork(1), all seeded
/// with config.seed. A stream is consumed only by the feature that owns it.
TrainResult run_training(Model student, const Model* teacher, const Dataset& train,
                         const DistillConfig& config, const Dataset* eval = nullptr,
                         const EpochCallback& on_epoch = {});

/// validate_training_setup followed by run_training.
TrainResult train(Model student, const Model* teacher, const Dataset& train,
                  const DistillConfig& config, const Dataset* eval = nullptr,
                  const EpochCallback& on_epoch = {});

}  // namespace dlab
