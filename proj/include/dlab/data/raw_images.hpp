// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlab/data/dataset.hpp"

namespace dlab {

/// RawLabeledImages: a 16-byte little-endian header followed by fixed-size
/// records.
///
///   offset 0   u32 magic        0x49524C44 ("DLRI" on disk)
///   offset 4   u16 channels
///   offset 6   u16 height
///   offset 8   u16 width
///   offset 10  u16 num_classes
///   offset 12  u32 record count
///   then per record: u8 label, channels*height*width u8 pixels (CHW order)
///
/// Pixels decode as value / 255.
inline constexpr std::uint32_t kRawImagesMagic = 0x49524C44;
inline constexpr std::size_t kRawImagesHeaderBytes = 16;

Dataset decode_raw_images(const std::vector<std::uint8_t>& bytes, Split split,
                          const std::string& source = "<memory>");
Dataset load_binary(const std::string& path, Split split);

/// Pixels are quantised with round(v * 255).
std::vector<std::uint8_t> encode_raw_images(const Dataset& dataset);
void save_binary(const std::string& path, const Dataset& dataset);

}  // namespace dlab
