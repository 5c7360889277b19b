#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "kgdial/nn/layers.hpp"

namespace kgdial::nn {

/// Binary layout: "KGDCKPT1", u32 version, u64 header length, JSON header
/// {kind, config, tensors: [{name, shape, dtype, offset}]}, then raw
/// little-endian f64 data in row-major order.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  nlohmann::json config;
  std::map<std::string, Matrix> tensors;

  static Checkpoint from_store(std::string kind, nlohmann::json config,
                               const ParameterStore& store);
  void save(const std::filesystem::path& path) const;
  /// Throws FormatError on a bad magic, version or truncated file.
  static Checkpoint load(const std::filesystem::path& path);

  /// Copies every stored tensor into `store`. Throws FormatError on missing
  /// names or shape mismatches.
  void restore(ParameterStore& store) const;
};

}  // namespace kgdial::nn
