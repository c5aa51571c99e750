// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dlab/autodiff/losses.hpp"
#include "dlab/autodiff/rng.hpp"
#include "dlab/autodiff/tape.hpp"

namespace dlab {

enum class Architecture { Mlp, SmallConv };

/// Active samples a fresh inverted-dropout mask per forward call; Inactive
/// applies neither mask nor rescaling.
enum class DropoutMode { Active, Inactive };

struct InputShape {
  std::size_t channels = 3;
  std::size_t height = 8;
  std::size_t width = 8;

  std::size_t numel() const { return channels * height * width; }
  bool operator==(const InputShape&) const = default;
};

struct ModelSpec {
  Architecture architecture = Architecture::SmallConv;
  InputShape input;
  /// Hidden widths (MLP) or convolution channel counts (SmallConv).
  std::vector<std::size_t> widths;
  /// SmallConv only: 2x2 average pooling after block i.
  std::vector<bool> pool_after;
  double dropout_rate = 0.0;
  std::size_t num_classes = 10;

  /// Throws ConfigError on zero widths, missing pools, a rate outside
  /// [0,1), or pooling that would shrink the feature map to nothing.
  void validate() const;

  bool operator==(const ModelSpec&) const = default;

  /// Two conv blocks (16 and 48 channels), ~9k parameters at 3x8x8.
  static ModelSpec student(InputShape input, std::size_t num_classes);
  /// Four conv blocks (24, 32, 48, 48 channels), ~44k parameters at 3x8x8.
  static ModelSpec teacher(InputShape input, std::size_t num_classes,
                           double dropout_rate);
  static ModelSpec mlp(InputShape input, std::vector<std::size_t> hidden,
                       std::size_t num_classes, double dropout_rate = 0.0);
};

/// Parameters are ordered layer by layer as (weight, bias). Velocity buffers
/// mirror the parameters and are owned here so a model carries its own
/// optimizer state.
class Model {
 public:
  /// Kaiming fan-in initialisation: hidden weights ~ N(0, 2/fan_in),
  /// classifier weights ~ N(0, 1/fan_in), zero biases.
  static Model init(const ModelSpec& spec, Rng& rng);
  /// Wraps existing parameters; shapes are checked against the spec.
  static Model from_parameters(const ModelSpec& spec, std::vector<Tensor> params);

  const ModelSpec& spec() const { return spec_; }
  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::vector<Tensor>& velocity() { return velocity_; }
  std::size_t parameter_count() const;

  bool identical(const Model& other) const;

 private:
  Model(ModelSpec spec, std::vector<Tensor> params);

  ModelSpec spec_;
  std::vector<Tensor> params_;
  std::vector<Tensor> velocity_;
};

/// Expected parameter shapes for a spec, in declaration order.
std::vector<Shape> parameter_shapes(const ModelSpec& spec);

/// Records the network on `tape`. Parameters enter as variables so their
/// gradients are available after backward(); `x` is [B,C,H,W]. Dropout
/// follows every hidden ReLU; `rng` is only consumed in Active mode with a
/// non-zero rate.
struct ForwardResult {
  Var logits;
  std::vector<Var> params;
};
ForwardResult forward(Tape& tape, const Model& model, Var x, DropoutMode mode,
                      Rng& rng);

/// Forward pass without keeping the tape.
Tensor predict_logits(const Model& model, const Tensor& x, DropoutMode mode,
                      Rng& rng);

/// Inactive-mode logits for every row of `x`, evaluated in chunks of
/// `batch` and spread over up to `threads` workers. Results do not depend
/// on the chunking or thread count.
Tensor batched_logits(const Model& model, const Tensor& x, std::size_t batch = 256,
                      std::size_t threads = 0);

/// Fraction of rows whose argmax equals the label.
double accuracy(const Model& model, const Tensor& x, std::span<const Label> labels,
                std::size_t threads = 0);

/// Rows [begin, end) of a batched tensor.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// Rows picked by `indices`, in that order.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);

/// Worker count for evaluation: DISTILL_LAB_THREADS if set, else hardware
/// concurrency, capped by `requested` when non-zero.
std::size_t evaluation_threads(std::size_t requested = 0);

/// Runs fn(c) for c in [0, chunks) on up to `workers` threads, chunk c going
/// to worker c % workers. The first exception thrown by any chunk is
/// rethrown after all workers have joined.
void parallel_chunks(std::size_t chunks, std::size_t workers,
                     const std::function<void(std::size_t)>& fn);

}  // namespace dlab
