// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/data/raw_images.hpp"

#include <cmath>
#include <limits>

#include "dlab/bytes.hpp"
#include "dlab/errors.hpp"

namespace dlab {

Dataset decode_raw_images(const std::vector<std::uint8_t>& bytes, Split split,
                          const std::string& source) {
  if (bytes.size() < kRawImagesHeaderBytes) {
    throw DataError(source + ": header truncated (" + std::to_string(bytes.size()) +
                    " bytes)");
  }
  ByteReader r(bytes.data(), bytes.size());
  const std::uint32_t magic = r.u32();
  if (magic != kRawImagesMagic) throw DataError(source + ": bad magic");
  const std::size_t chans = r.u16(), h = r.u16(), w = r.u16(), classes = r.u16();
  const std::size_t count = r.u32();
  if (chans == 0 || h == 0 || w == 0 || classes == 0) {
    throw DataError(source + ": header has a zero dimension");
  }
  const std::size_t pixels = chans * h * w;
  const std::size_t record_bytes = 1 + pixels;
  const std::size_t body = bytes.size() - kRawImagesHeaderBytes;
  if (body < count * record_bytes) {
    throw DataError(source + ": file truncated in record " +
                        std::to_string(body / record_bytes) + " of " +
                        std::to_string(count),
                    body / record_bytes);
  }
  if (body > count * record_bytes) {
    throw DataError(source + ": header declares " + std::to_string(count) +
                    " records but file holds extra bytes");
  }

  Tensor images({count, chans, h, w});
  std::vector<Label> labels(count);
  const std::uint8_t* p = bytes.data() + kRawImagesHeaderBytes;
  for (std::size_t i = 0; i < count; ++i, p += record_bytes) {
    if (p[0] >= classes) {
      throw DataError(source + ": record " + std::to_string(i) + " has label " +
                          std::to_string(p[0]) + " >= num_classes " +
                          std::to_string(classes),
                      i);
    }
    labels[i] = p[0];
    double* dst = images.ptr() + i * pixels;
    for (std::size_t k = 0; k < pixels; ++k) dst[k] = static_cast<double>(p[1 + k]) / 255.0;
  }
  return Dataset(std::move(images), std::move(labels), classes, split,
                 "raw images " + source);
}

Dataset load_binary(const std::string& path, Split split) {
  return decode_raw_images(read_file_bytes(path), split, path);
}

std::vector<std::uint8_t> encode_raw_images(const Dataset& dataset) {
  const InputShape in = dataset.input_shape();
  constexpr std::size_t kMax16 = std::numeric_limits<std::uint16_t>::max();
  if (in.channels > kMax16 || in.height > kMax16 || in.width > kMax16 ||
      dataset.num_classes() > 256) {
    throw DataError("raw images: dimensions exceed the format limits");
  }
  ByteWriter w;
  w.u32(kRawImagesMagic);
  w.u16(static_cast<std::uint16_t>(in.channels));
  w.u16(static_cast<std::uint16_t>(in.height));
  w.u16(static_cast<std::uint16_t>(in.width));
  w.u16(static_cast<std::uint16_t>(dataset.num_classes()));
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  const std::size_t pixels = in.numel();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    w.u8(static_cast<std::uint8_t>(dataset.labels()[i]));
    const double* src = dataset.images().ptr() + i * pixels;
    for (std::size_t k = 0; k < pixels; ++k) {
      w.u8(static_cast<std::uint8_t>(std::lround(src[k] * 255.0)));
    }
  }
  return w.bytes();
}

void save_binary(const std::string& path, const Dataset& dataset) {
  write_file_bytes(path, encode_raw_images(dataset));
}

}  // namespace dlab
