// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/distill/trainer.hpp"

#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "dlab/autodiff/optim.hpp"
#include "dlab/distill/losses.hpp"
#include "dlab/errors.hpp"
#include "dlab/robustness/attack.hpp"

namespace dlab {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Baseline: return "baseline";
    case Method::Hinton: return "hinton";
    case Method::FT: return "ft";
    case Method::SR: return "sr";
    case Method::GA: return "ga";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::Baseline, Method::Hinton, Method::FT, Method::SR, Method::GA}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

bool method_uses_teacher(Method m) {
  return m == Method::Hinton || m == Method::FT || m == Method::SR;
}

void DistillConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be non-negative");
  if (!(mc_rate >= 0.0 && mc_rate <= 1.0)) throw ConfigError("mc_rate must lie in [0, 1]");
  if (!(teacher_dropout_rate >= 0.0 && teacher_dropout_rate < 1.0)) {
    throw ConfigError("teacher_dropout_rate must lie in [0, 1)");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  schedule.validate();
}

ScheduleSpec effective_schedule(const DistillConfig& config, const Model* teacher) {
  if (config.method != Method::FT || !config.ft_extended_schedule || teacher == nullptr) {
    return config.schedule;
  }
  const double scale = static_cast<double>(config.schedule.total_epochs) / 200.0;
  std::optional<ScheduleSpec> ft =
      ft_extended_schedule(teacher->spec().dropout_rate, scale);
  if (!ft) return config.schedule;
  ft->initial_lr = config.schedule.initial_lr;
  ft->decay_factor = config.schedule.decay_factor;
  return *ft;
}

void validate_training_setup(const Model& student, const Model* teacher,
                             const Dataset& train, const DistillConfig& config) {
  config.validate();
  if (student.spec().input != train.input_shape() ||
      student.spec().num_classes != train.num_classes()) {
    throw ConfigError("student does not match the training data shape");
  }
  if (!method_uses_teacher(config.method)) return;
  if (teacher == nullptr) {
    throw ConfigError(std::string(method_name(config.method)) + " requires a teacher");
  }
  if (teacher->spec().input != student.spec().input ||
      teacher->spec().num_classes != student.spec().num_classes) {
    throw ConfigError("teacher and student disagree on input shape or class count");
  }
  if (config.method == Method::FT && teacher->spec().dropout_rate == 0.0) {
    throw ConfigError("ft requires a teacher trained with dropout_rate > 0");
  }
}

TrainResult run_training(Model student, const Model* teacher, const Dataset& train,
                         const DistillConfig& config, const Dataset* eval,
                         const EpochCallback& on_epoch) {
  config.validate();
  const Method method = config.method;
  if (method_uses_teacher(method) && teacher == nullptr) {
    throw ConfigError(std::string(method_name(method)) + " requires a teacher");
  }
  const std::size_t n = train.size();
  if (n == 0) throw DataError("training set is empty");

  const std::uint64_t seed = config.seed;
  Rng shuffle_rng(seed, Stream::DataShuffle);
  Rng noise_rng(seed, Stream::GaussianNoise);
  Rng mc_rng(seed, Stream::McLabels);
  Rng student_drop = Rng(seed, Stream::Dropout).fork(0);
  Rng teacher_drop = Rng(seed, Stream::Dropout).fork(1);

  // A static teacher sees each image with dropout off, so its logits are
  // computed once.
  Tensor teacher_cache;
  if (method == Method::Hinton || method == Method::SR) {
    teacher_cache = batched_logits(*teacher, train.images());
    teacher_cache.require_finite("teacher logits");
  }
  // The student never uses dropout under FT.
  const DropoutMode student_mode =
      method == Method::FT ? DropoutMode::Inactive : DropoutMode::Active;

  TrainResult result{std::move(student), effective_schedule(config, teacher), {}};
  Model& model = result.model;
  const ScheduleSpec& schedule = result.schedule;

  std::vector<std::size_t> order(n);
  std::vector<Tensor> grads;
  for (std::size_t epoch = 0; epoch < schedule.total_epochs; ++epoch) {
    const double lr = lr_at(schedule, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }

    double loss_sum = 0.0, ce_sum = 0.0, kl_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += config.batch_size) {
      const std::size_t b1 = std::min(n, b0 + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + b0, b1 - b0);
      const Tensor xb = gather_rows(train.images(), idx);
      std::vector<Label> yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = train.labels()[idx[i]];
      if (config.mc_rate > 0.0) {
        yb = mc_corrupt_labels(yb, config.mc_rate, train.num_classes(), mc_rng);
      }

      const bool noisy_input = method == Method::SR || method == Method::GA;
      const Tensor x_in = noisy_input ? gaussian_augment(xb, config.sigma, noise_rng) : xb;

      Tape tape;
      ForwardResult fwd = forward(tape, model, tape.constant(x_in), student_mode, student_drop);
      Var total, ce, kl;
      if (method_uses_teacher(method)) {
        const Tensor t_logits =
            method == Method::FT
                ? predict_logits(*teacher, xb, DropoutMode::Active, teacher_drop)
                : gather_rows(teacher_cache, idx);
        const DistillLoss l = hinton_loss(fwd.logits, t_logits, yb, config.alpha, config.tau);
        total = l.total;
        ce = l.ce;
        kl = l.kl;
      } else {
        total = ce = cross_entropy(fwd.logits, yb);
      }
      const double loss = total.value().item();
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      tape.backward(total);
      grads.clear();
      for (const Var& p : fwd.params) grads.push_back(tape.grad(p));
      sgd_momentum_step(model.parameters(), grads, model.velocity(), lr, config.momentum);

      loss_sum += loss;
      ce_sum += ce.value().item();
      kl_sum += kl.valid() ? kl.value().item() : 0.0;
      ++batches;
    }
    for (const Tensor& p : model.parameters()) p.require_finite("student parameters");

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.train_ce = ce_sum / static_cast<double>(batches);
    stats.train_kl = kl_sum / static_cast<double>(batches);
    stats.test_accuracy =
        eval ? accuracy(model, eval->images(), eval->labels()) : std::nan("");
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

TrainResult train(Model student, const Model* teacher, const Dataset& train_set,
                  const DistillConfig& config, const Dataset* eval,
                  const EpochCallback& on_epoch) {
  validate_training_setup(student, teacher, train_set, config);
  return run_training(std::move(student), teacher, train_set, config, eval, on_epoch);
}

}  // namespace dlab
