// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlab/models/model.hpp"

namespace dlab {

/// Checkpoint container, all integers and doubles little-endian:
///
///   "DLCK"            4-byte magic
///   u32 version       currently 1
///   u32 architecture  0 = MLP, 1 = SmallConv
///   u32 channels, u32 height, u32 width, u32 num_classes
///   f64 dropout_rate
///   u32 n_widths, then n_widths x u32 width
///   u32 n_pool,   then n_pool x u8 pool flag
///   u32 n_params, then per tensor: u32 rank, rank x u64 dim, numel x f64
///
/// Parameters appear in declaration order. Optimizer state is not stored.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace dlab
