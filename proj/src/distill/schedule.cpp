// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/distill/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dlab/errors.hpp"

namespace dlab {

void ScheduleSpec::validate() const {
  if (total_epochs == 0) throw ConfigError("schedule: total_epochs must be positive");
  if (!(initial_lr > 0.0)) throw ConfigError("schedule: initial_lr must be positive");
  if (!(decay_factor > 0.0)) throw ConfigError("schedule: decay_factor must be positive");
  for (std::size_t i = 0; i < decay_epochs.size(); ++i) {
    if (decay_epochs[i] >= total_epochs) {
      throw ConfigError("schedule: decay epoch " + std::to_string(decay_epochs[i]) +
                        " not below total_epochs " + std::to_string(total_epochs));
    }
    if (i > 0 && decay_epochs[i] <= decay_epochs[i - 1]) {
      throw ConfigError("schedule: decay epochs must be strictly increasing");
    }
  }
}

ScheduleSpec ScheduleSpec::standard() { return ScheduleSpec{}; }

ScheduleSpec ScheduleSpec::scaled(double factor) const {
  if (!(factor > 0.0)) throw ConfigError("schedule: scale factor must be positive");
  auto scale = [factor](std::size_t e) {
    return static_cast<std::size_t>(std::lround(static_cast<double>(e) * factor));
  };
  ScheduleSpec out = *this;
  out.total_epochs = std::max<std::size_t>(1, scale(total_epochs));
  out.decay_epochs.clear();
  for (std::size_t e : decay_epochs) {
    const std::size_t d = scale(e);
    if (d >= out.total_epochs) continue;
    if (!out.decay_epochs.empty() && d <= out.decay_epochs.back()) continue;
    out.decay_epochs.push_back(d);
  }
  out.validate();
  return out;
}

double lr_at(const ScheduleSpec& schedule, std::size_t epoch) {
  if (epoch >= schedule.total_epochs) {
    throw ConfigError("lr_at: epoch " + std::to_string(epoch) + " outside schedule of " +
                      std::to_string(schedule.total_epochs));
  }
  double lr = schedule.initial_lr;
  for (std::size_t d : schedule.decay_epochs) {
    if (d <= epoch) lr *= schedule.decay_factor;
  }
  return lr;
}

std::optional<ScheduleSpec> ft_extended_schedule(double teacher_dropout_rate,
                                                 double epoch_scale) {
  if (!(teacher_dropout_rate >= 0.0 && teacher_dropout_rate < 1.0)) {
    throw ConfigError("ft schedule: dropout rate must lie in [0, 1)");
  }
  if (teacher_dropout_rate == 0.0) return std::nullopt;
  ScheduleSpec s;
  if (teacher_dropout_rate < 0.25) {
    s.total_epochs = 250;
    s.decay_epochs = {75, 150, 200};
  } else if (teacher_dropout_rate < 0.35) {
    s.total_epochs = 300;
    s.decay_epochs = {90, 180, 240};
  } else {
    s.total_epochs = 350;
    s.decay_epochs = {105, 210, 280};
  }
  return epoch_scale == 1.0 ? s : s.scaled(epoch_scale);
}

}  // namespace dlab
