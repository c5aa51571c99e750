// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "dlab/autodiff/tape.hpp"

namespace dlab {

// Elementwise and reduction primitives. Operands must live on the same tape.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);

/// x[B,I], weight[O,I], bias[O] -> [B,O].
Var linear(Var x, Var weight, Var bias);

/// Stride-1 convolution with symmetric zero padding.
/// x[B,C,H,W], weight[O,C,K,K], bias[O] -> [B,O,H+2p-K+1,W+2p-K+1].
Var conv2d(Var x, Var weight, Var bias, std::size_t padding);

Var relu(Var x);

/// Non-overlapping average pooling with a square window; trailing rows and
/// columns that do not fill a window are dropped. x[B,C,H,W].
Var avg_pool2d(Var x, std::size_t window);

/// [B, ...] -> [B, prod(...)].
Var flatten(Var x);

/// x * mask with a constant mask of identical shape (used by dropout).
Var apply_mask(Var x, const Tensor& mask);

/// log(softmax(x / tau)) row-wise for x[B,C].
Var log_softmax(Var logits, double tau);

namespace kernels {

/// c[m,n] += a[m,k] * b[k,n], all row-major. Each output element is
/// accumulated in increasing k order regardless of m and n, so a row's
/// result does not depend on the other rows in the batch.
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
              const double* b, double* c);

/// out[cols,rows] = in[rows,cols]^T.
void transpose(std::size_t rows, std::size_t cols, const double* in, double* out);

}  // namespace kernels

}  // namespace dlab
