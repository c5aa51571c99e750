// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/autodiff/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dlab/errors.hpp"

namespace dlab {

namespace {

constexpr double kRowSumTolerance = 1e-6;

void require_logits(const Tensor& logits, const char* where) {
  if (logits.rank() != 2 || logits.dim(0) == 0 || logits.dim(1) == 0) {
    throw ShapeError(std::string(where) + ": expected non-empty [B,C], got " +
                     shape_str(logits.shape()));
  }
  logits.require_finite(where);
}

void require_labels(std::span<const Label> labels, std::size_t batch,
                    std::size_t classes, const char* where) {
  if (labels.size() != batch) {
    throw ShapeError(std::string(where) + ": " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(batch));
  }
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
      throw ConfigError(std::string(where) + ": label " +
                        std::to_string(labels[b]) + " at index " +
                        std::to_string(b) + " outside [0," +
                        std::to_string(classes) + ")");
    }
  }
}

double row_logsumexp(const double* row, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) mx = std::max(mx, row[c]);
  double s = 0.0;
  for (std::size_t c = 0; c < n; ++c) s += std::exp(row[c] - mx);
  return mx + std::log(s);
}

}  // namespace

Tensor softmax_temperature(const Tensor& logits, double tau) {
  if (!(tau > 0.0)) throw ConfigError("softmax_temperature: tau must be positive");
  require_logits(logits, "softmax_temperature");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  Tensor out({batch, classes});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = logits.ptr() + b * classes;
    double* dst = out.ptr() + b * classes;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, row[c] / tau);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      dst[c] = std::exp(row[c] / tau - mx);
      s += dst[c];
    }
    for (std::size_t c = 0; c < classes; ++c) dst[c] /= s;
  }
  return out;
}

Var cross_entropy(Var logits, std::span<const Label> labels) {
  const Tensor& xv = logits.value();
  require_logits(xv, "cross_entropy");
  const std::size_t batch = xv.dim(0), classes = xv.dim(1);
  require_labels(labels, batch, classes, "cross_entropy");
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = xv.ptr() + b * classes;
    total += row_logsumexp(row, classes) - row[labels[b]];
  }
  const double loss = total / static_cast<double>(batch);
  const NodeId ix = logits.id();
  std::vector<Label> owned(labels.begin(), labels.end());
  return logits.tape().record(
      Tensor({1}, {loss}), {ix},
      [ix, batch, classes, owned = std::move(owned)](Tape& t, NodeId self) {
        const double g = t.grad_ref(self)[0] / static_cast<double>(batch);
        const Tensor& xv = t.value(ix);
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t b = 0; b < batch; ++b) {
          const double* row = xv.ptr() + b * classes;
          const double lse = row_logsumexp(row, classes);
          for (std::size_t c = 0; c < classes; ++c) {
            double p = std::exp(row[c] - lse);
            if (static_cast<Label>(c) == owned[b]) p -= 1.0;
            gx[b * classes + c] += g * p;
          }
        }
      });
}

std::vector<double> cross_entropy_per_sample(const Tensor& logits,
                                             std::span<const Label> labels) {
  require_logits(logits, "cross_entropy_per_sample");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  require_labels(labels, batch, classes, "cross_entropy_per_sample");
  std::vector<double> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = logits.ptr() + b * classes;
    out[b] = row_logsumexp(row, classes) - row[labels[b]];
  }
  return out;
}

Var kl_divergence(const Tensor& target, Var log_probs) {
  const Tensor& lq = log_probs.value();
  require_same_shape(target, lq, "kl_divergence");
  if (lq.rank() != 2 || lq.dim(0) == 0) {
    throw ShapeError("kl_divergence: expected non-empty [B,C], got " +
                     shape_str(lq.shape()));
  }
  if (!target.all_finite()) throw NumericError("kl_divergence: non-finite target");
  for (double v : lq.data()) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw NumericError("kl_divergence: invalid log-probability");
    }
  }
  const std::size_t batch = lq.dim(0), classes = lq.dim(1);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double psum = 0.0, qsum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = target[b * classes + c];
      if (p < 0.0) throw ConfigError("kl_divergence: negative target probability");
      psum += p;
      qsum += std::exp(lq[b * classes + c]);
    }
    if (std::abs(psum - 1.0) > kRowSumTolerance ||
        std::abs(qsum - 1.0) > kRowSumTolerance) {
      throw ConfigError("kl_divergence: row " + std::to_string(b) +
                        " is not a distribution");
    }
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = target[b * classes + c];
      if (p > 0.0) total += p * (std::log(p) - lq[b * classes + c]);
    }
  }
  const double loss = total / static_cast<double>(batch);
  const NodeId iq = log_probs.id();
  return log_probs.tape().record(
      Tensor({1}, {loss}), {iq}, [iq, target, batch](Tape& t, NodeId self) {
        const double g = t.grad_ref(self)[0] / static_cast<double>(batch);
        Tensor& gq = t.grad_buffer(iq);
        for (std::size_t i = 0; i < target.size(); ++i) gq[i] -= g * target[i];
      });
}

std::vector<Label> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows: expected [B,C]");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  std::vector<Label> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = logits.ptr() + b * classes;
    out[b] = static_cast<Label>(std::max_element(row, row + classes) - row);
  }
  return out;
}

}  // namespace dlab
