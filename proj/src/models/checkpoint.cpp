// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/models/checkpoint.hpp"

#include "dlab/bytes.hpp"
#include "dlab/errors.hpp"

namespace dlab {

namespace {
constexpr char kMagic[4] = {'D', 'L', 'C', 'K'};
}

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  const ModelSpec& spec = model.spec();
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(spec.architecture == Architecture::Mlp ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(spec.input.channels));
  w.u32(static_cast<std::uint32_t>(spec.input.height));
  w.u32(static_cast<std::uint32_t>(spec.input.width));
  w.u32(static_cast<std::uint32_t>(spec.num_classes));
  w.f64(spec.dropout_rate);
  w.u32(static_cast<std::uint32_t>(spec.widths.size()));
  for (std::size_t v : spec.widths) w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(spec.pool_after.size()));
  for (bool p : spec.pool_after) w.u8(p ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const Tensor& t : model.parameters()) {
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  return w.bytes();
}

Model decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  char magic[4];
  r.raw(magic, 4);
  if (std::string(magic, 4) != std::string(kMagic, 4)) {
    throw DataError("checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelSpec spec;
  const std::uint32_t arch = r.u32();
  if (arch > 1) throw DataError("checkpoint: unknown architecture " + std::to_string(arch));
  spec.architecture = arch == 0 ? Architecture::Mlp : Architecture::SmallConv;
  spec.input.channels = r.u32();
  spec.input.height = r.u32();
  spec.input.width = r.u32();
  spec.num_classes = r.u32();
  spec.dropout_rate = r.f64();
  const std::uint32_t n_widths = r.u32();
  if (n_widths > r.remaining() / 4) throw DataError("checkpoint: width list truncated");
  for (std::uint32_t i = 0; i < n_widths; ++i) spec.widths.push_back(r.u32());
  const std::uint32_t n_pool = r.u32();
  if (n_pool > r.remaining()) throw DataError("checkpoint: pool list truncated");
  for (std::uint32_t i = 0; i < n_pool; ++i) spec.pool_after.push_back(r.u8() != 0);
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: invalid model spec: ") + e.what());
  }
  const std::uint32_t n_params = r.u32();
  std::vector<Tensor> params;
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DataError("checkpoint: implausible tensor rank", i);
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = shape_numel(shape);
    if (n > r.remaining() / 8) throw DataError("checkpoint: tensor data truncated", i);
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    params.emplace_back(std::move(shape), std::move(data));
  }
  if (r.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  try {
    return Model::from_parameters(spec, std::move(params));
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Model& model) {
  write_file_bytes(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace dlab
