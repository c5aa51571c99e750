// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace dlab {

/// Step-decay learning-rate schedule.
struct ScheduleSpec {
  std::size_t total_epochs = 200;
  double initial_lr = 0.1;
  double decay_factor = 0.2;
  std::vector<std::size_t> decay_epochs{60, 120, 150};

  /// Decay epochs strictly increasing and below total_epochs.
  void validate() const;
  bool operator==(const ScheduleSpec&) const = default;

  /// 200 epochs, lr 0.1, x0.2 at 60/120/150.
  static ScheduleSpec standard();
  /// Every epoch count multiplied by `factor` and rounded; the lr values are
  /// unchanged. scaled(0.2) gives the 40-epoch desk schedule. Decay points
  /// that round onto an earlier one, or past the end, are dropped.
  ScheduleSpec scaled(double factor) const;
};

/// initial_lr * decay_factor^(number of decay epochs <= epoch).
double lr_at(const ScheduleSpec& schedule, std::size_t epoch);

/// Longer schedules for distilling from a teacher whose dropout stays on:
/// rate < 0.25 -> 250 epochs at 75/150/200; rate < 0.35 -> 300 at
/// 90/180/240; otherwise 350 at 105/210/280. Epoch counts are multiplied by
/// `epoch_scale`. Returns nullopt for rate 0.
std::optional<ScheduleSpec> ft_extended_schedule(double teacher_dropout_rate,
                                                 double epoch_scale = 1.0);

}  // namespace dlab
