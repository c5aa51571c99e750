// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "dlab/autodiff/ops.hpp"
#include "dlab/errors.hpp"

namespace dlab {

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kPadding = 1;

std::size_t pool_count(const ModelSpec& spec) {
  return static_cast<std::size_t>(
      std::count(spec.pool_after.begin(), spec.pool_after.end(), true));
}

std::size_t classifier_fan_in(const ModelSpec& spec) {
  if (spec.architecture == Architecture::Mlp) {
    return spec.widths.empty() ? spec.input.numel() : spec.widths.back();
  }
  std::size_t h = spec.input.height, w = spec.input.width;
  for (bool p : spec.pool_after) {
    if (p) {
      h /= 2;
      w /= 2;
    }
  }
  return spec.widths.back() * h * w;
}

Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  Tensor mask(shape);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

Var maybe_dropout(Var h, const ModelSpec& spec, DropoutMode mode, Rng& rng) {
  if (mode == DropoutMode::Inactive || spec.dropout_rate == 0.0) return h;
  return apply_mask(h, dropout_mask(h.shape(), spec.dropout_rate, rng));
}

}  // namespace

void ModelSpec::validate() const {
  if (num_classes == 0) throw ConfigError("model: num_classes must be positive");
  if (input.channels == 0 || input.height == 0 || input.width == 0) {
    throw ConfigError("model: input shape has a zero dimension");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("model: dropout rate must lie in [0, 1)");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("model: zero-width layer");
  }
  if (architecture == Architecture::SmallConv) {
    if (widths.empty()) throw ConfigError("model: SmallConv needs at least one block");
    if (pool_after.size() != widths.size()) {
      throw ConfigError("model: pool_after must have one flag per conv block");
    }
    const std::size_t shrink = std::size_t{1} << pool_count(*this);
    if (input.height < shrink || input.width < shrink) {
      throw ConfigError("model: pooling reduces the feature map to zero");
    }
  } else if (!pool_after.empty()) {
    throw ConfigError("model: MLP does not pool");
  }
}

ModelSpec ModelSpec::student(InputShape input, std::size_t num_classes) {
  ModelSpec s;
  s.architecture = Architecture::SmallConv;
  s.input = input;
  s.widths = {16, 48};
  s.pool_after = {true, true};
  s.num_classes = num_classes;
  return s;
}

ModelSpec ModelSpec::teacher(InputShape input, std::size_t num_classes,
                             double dropout_rate) {
  ModelSpec s;
  s.architecture = Architecture::SmallConv;
  s.input = input;
  s.widths = {24, 32, 48, 48};
  s.pool_after = {true, false, true, false};
  s.dropout_rate = dropout_rate;
  s.num_classes = num_classes;
  return s;
}

ModelSpec ModelSpec::mlp(InputShape input, std::vector<std::size_t> hidden,
                         std::size_t num_classes, double dropout_rate) {
  ModelSpec s;
  s.architecture = Architecture::Mlp;
  s.input = input;
  s.widths = std::move(hidden);
  s.dropout_rate = dropout_rate;
  s.num_classes = num_classes;
  return s;
}

std::vector<Shape> parameter_shapes(const ModelSpec& spec) {
  spec.validate();
  std::vector<Shape> shapes;
  if (spec.architecture == Architecture::Mlp) {
    std::size_t fan_in = spec.input.numel();
    for (std::size_t w : spec.widths) {
      shapes.push_back({w, fan_in});
      shapes.push_back({w});
      fan_in = w;
    }
  } else {
    std::size_t in_ch = spec.input.channels;
    for (std::size_t w : spec.widths) {
      shapes.push_back({w, in_ch, kKernel, kKernel});
      shapes.push_back({w});
      in_ch = w;
    }
  }
  shapes.push_back({spec.num_classes, classifier_fan_in(spec)});
  shapes.push_back({spec.num_classes});
  return shapes;
}

Model::Model(ModelSpec spec, std::vector<Tensor> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  velocity_.reserve(params_.size());
  for (const Tensor& p : params_) velocity_.emplace_back(p.shape());
}

Model Model::init(const ModelSpec& spec, Rng& rng) {
  const std::vector<Shape> shapes = parameter_shapes(spec);
  std::vector<Tensor> params;
  params.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor t(shapes[i]);
    if (shapes[i].size() > 1) {
      const std::size_t fan_in = t.size() / shapes[i][0];
      const bool classifier = i + 2 == shapes.size();
      const double stddev =
          std::sqrt((classifier ? 1.0 : 2.0) / static_cast<double>(fan_in));
      for (double& v : t.data()) v = stddev * rng.normal();
    }
    params.push_back(std::move(t));
  }
  return Model(spec, std::move(params));
}

Model Model::from_parameters(const ModelSpec& spec, std::vector<Tensor> params) {
  const std::vector<Shape> shapes = parameter_shapes(spec);
  if (shapes.size() != params.size()) {
    throw ShapeError("model: expected " + std::to_string(shapes.size()) +
                     " parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params[i].shape() != shapes[i]) {
      throw ShapeError("model: parameter " + std::to_string(i) + " has shape " +
                       shape_str(params[i].shape()) + ", expected " +
                       shape_str(shapes[i]));
    }
  }
  return Model(spec, std::move(params));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

bool Model::identical(const Model& other) const {
  if (!(spec_ == other.spec_) || params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].identical(other.params_[i])) return false;
  }
  return true;
}

ForwardResult forward(Tape& tape, const Model& model, Var x, DropoutMode mode,
                      Rng& rng) {
  const ModelSpec& spec = model.spec();
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[1] != spec.input.channels ||
      xs[2] != spec.input.height || xs[3] != spec.input.width) {
    throw ShapeError("forward: input " + shape_str(xs) + " does not match model input [B," +
                     std::to_string(spec.input.channels) + "," +
                     std::to_string(spec.input.height) + "," +
                     std::to_string(spec.input.width) + "]");
  }
  ForwardResult out;
  for (const Tensor& p : model.parameters()) out.params.push_back(tape.variable(p));

  Var h = x;
  std::size_t layer = 0;
  if (spec.architecture == Architecture::Mlp) {
    h = flatten(h);
    for (; layer < spec.widths.size(); ++layer) {
      h = relu(linear(h, out.params[2 * layer], out.params[2 * layer + 1]));
      h = maybe_dropout(h, spec, mode, rng);
    }
  } else {
    for (; layer < spec.widths.size(); ++layer) {
      h = relu(conv2d(h, out.params[2 * layer], out.params[2 * layer + 1], kPadding));
      h = maybe_dropout(h, spec, mode, rng);
      if (spec.pool_after[layer]) h = avg_pool2d(h, 2);
    }
    h = flatten(h);
  }
  out.logits = linear(h, out.params[2 * layer], out.params[2 * layer + 1]);
  return out;
}

Tensor predict_logits(const Model& model, const Tensor& x, DropoutMode mode,
                      Rng& rng) {
  Tape tape;
  Var xv = tape.constant(x);
  return forward(tape, model, xv, mode, rng).logits.value();
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.dim(0)) {
    throw ShapeError("slice_rows: bad range on " + shape_str(x.shape()));
  }
  const std::size_t row = x.dim(0) ? x.size() / x.dim(0) : 0;
  Shape shape = x.shape();
  shape[0] = end - begin;
  return Tensor(std::move(shape),
                std::vector<double>(x.ptr() + begin * row, x.ptr() + end * row));
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  if (x.rank() == 0) throw ShapeError("gather_rows: scalar input");
  const std::size_t row = x.dim(0) ? x.size() / x.dim(0) : 0;
  Shape shape = x.shape();
  shape[0] = indices.size();
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.dim(0)) throw ShapeError("gather_rows: index out of range");
    std::copy(x.ptr() + indices[i] * row, x.ptr() + (indices[i] + 1) * row,
              out.ptr() + i * row);
  }
  return out;
}

void parallel_chunks(std::size_t chunks, std::size_t workers,
                     const std::function<void(std::size_t)>& fn) {
  workers = std::min(workers, chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::size_t evaluation_threads(std::size_t requested) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DISTILL_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) cap = static_cast<std::size_t>(v);
  }
  return requested ? std::min(requested, cap) : cap;
}

Tensor batched_logits(const Model& model, const Tensor& x, std::size_t batch,
                      std::size_t threads) {
  if (x.rank() != 4) throw ShapeError("batched_logits: expected [N,C,H,W]");
  const std::size_t n = x.dim(0);
  const std::size_t classes = model.spec().num_classes;
  Tensor out({n, classes});
  if (n == 0) return out;
  batch = std::max<std::size_t>(batch, 1);
  const std::size_t chunks = (n + batch - 1) / batch;
  const std::size_t workers = std::min(evaluation_threads(threads), chunks);

  auto run_chunk = [&](std::size_t c) {
    const std::size_t b0 = c * batch, b1 = std::min(n, b0 + batch);
    Rng unused(0, Stream::Dropout);
    Tensor logits =
        predict_logits(model, slice_rows(x, b0, b1), DropoutMode::Inactive, unused);
    std::copy(logits.ptr(), logits.ptr() + logits.size(), out.ptr() + b0 * classes);
  };
  parallel_chunks(chunks, workers, run_chunk);
  return out;
}

double accuracy(const Model& model, const Tensor& x, std::span<const Label> labels,
                std::size_t threads) {
  if (x.rank() == 0 || x.dim(0) != labels.size()) {
    throw ShapeError("accuracy: image and label counts differ");
  }
  if (labels.empty()) return 0.0;
  const std::vector<Label> pred = argmax_rows(batched_logits(model, x, 256, threads));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace dlab
