// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/robustness/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dlab/autodiff/ops.hpp"
#include "dlab/errors.hpp"

namespace dlab {

namespace {

constexpr double kBallSlack = 1e-9;
constexpr std::size_t kAttackBatch = 128;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_attack_output(const Tensor& x, const Tensor& adv, double eps) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(adv[i] >= 0.0 && adv[i] <= 1.0) || std::abs(adv[i] - x[i]) > eps + kBallSlack) {
      throw std::logic_error("pgd_attack: iterate left the eps-ball or [0,1]");
    }
  }
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack: epsilon must be non-negative");
  if (steps > 0 && !(step_size > 0.0)) throw ConfigError("attack: step_size must be positive");
  if (restarts == 0) throw ConfigError("attack: restarts must be at least 1");
}

Tensor gaussian_augment(const Tensor& x, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("gaussian_augment: sigma must be non-negative");
  Tensor out = x;
  for (double& v : out.data()) v += sigma * rng.normal();
  return out;
}

Tensor pgd_attack(const Model& model, const Tensor& x, std::span<const Label> labels,
                  const AttackConfig& cfg, const Rng& rng, std::size_t index_offset) {
  cfg.validate();
  if (x.rank() != 4 || x.dim(0) != labels.size()) {
    throw ShapeError("pgd_attack: expected [N,C,H,W] images with one label each");
  }
  for (double v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("pgd_attack: input outside [0,1]");
  }
  if (cfg.steps == 0) return x;

  const std::size_t n = x.dim(0);
  const std::size_t row = n ? x.size() / n : 0;
  const double eps = cfg.epsilon;
  Tensor lo = x, hi = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo[i] = std::max(0.0, x[i] - eps);
    hi[i] = std::min(1.0, x[i] + eps);
  }

  Tensor best = x;
  std::vector<bool> best_fooled(n, false);
  std::vector<double> best_loss(n, -std::numeric_limits<double>::infinity());
  Rng unused(0, Stream::Dropout);

  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Tensor xr = x;
    for (std::size_t b = 0; cfg.random_start && b < n; ++b) {
      Rng init = rng.fork(index_offset + b).fork(r);
      for (std::size_t k = b * row; k < (b + 1) * row; ++k) {
        xr[k] = std::clamp(x[k] + eps * init.uniform(-1.0, 1.0), lo[k], hi[k]);
      }
    }
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      Tape tape;
      Var xv = tape.variable(xr);
      Var logits = forward(tape, model, xv, DropoutMode::Inactive, unused).logits;
      tape.backward(cross_entropy(logits, labels));
      const Tensor& g = tape.grad_ref(xv.id());
      for (std::size_t k = 0; k < xr.size(); ++k) {
        const double moved = xr[k] + cfg.step_size * sign(g.empty() ? 0.0 : g[k]);
        xr[k] = std::clamp(moved, lo[k], hi[k]);
      }
    }
    const Tensor logits = predict_logits(model, xr, DropoutMode::Inactive, unused);
    const std::vector<double> loss = cross_entropy_per_sample(logits, labels);
    const std::vector<Label> pred = argmax_rows(logits);
    for (std::size_t b = 0; b < n; ++b) {
      const bool fooled = pred[b] != labels[b];
      const bool better = (fooled && !best_fooled[b]) ||
                          (fooled == best_fooled[b] && loss[b] > best_loss[b]);
      if (!better) continue;
      best_fooled[b] = fooled;
      best_loss[b] = loss[b];
      std::copy(xr.ptr() + b * row, xr.ptr() + (b + 1) * row, best.ptr() + b * row);
    }
  }
  check_attack_output(x, best, eps);
  return best;
}

double evaluate_robustness(const Model& model, const Dataset& dataset,
                           const AttackConfig& cfg, const Rng& rng,
                           std::size_t threads) {
  cfg.validate();
  const std::size_t n = dataset.size();
  if (n == 0) throw UndefinedMetricError("evaluate_robustness: empty dataset");
  const std::size_t chunks = (n + kAttackBatch - 1) / kAttackBatch;
  std::vector<std::size_t> correct(chunks, 0);

  auto run_chunk = [&](std::size_t c) {
    const std::size_t b0 = c * kAttackBatch, b1 = std::min(n, b0 + kAttackBatch);
    const Tensor xb = slice_rows(dataset.images(), b0, b1);
    std::span<const Label> yb(dataset.labels().data() + b0, b1 - b0);
    const Tensor adv = pgd_attack(model, xb, yb, cfg, rng, b0);
    Rng unused(0, Stream::Dropout);
    const std::vector<Label> pred =
        argmax_rows(predict_logits(model, adv, DropoutMode::Inactive, unused));
    for (std::size_t i = 0; i < pred.size(); ++i) correct[c] += pred[i] == yb[i];
  };
  parallel_chunks(chunks, evaluation_threads(threads), run_chunk);
  std::size_t total = 0;
  for (std::size_t c : correct) total += c;
  return static_cast<double>(total) / static_cast<double>(n);
}

}  // namespace dlab
