#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "geolab/nn/tensor.hpp"

namespace geolab::nn {

// GEOL container layout (all integers little-endian):
//   "GEOL" | u32 version | u32 manifest bytes | manifest ("key=value\n" lines)
//   | u32 array count | arrays...
// Each array: u32 name bytes | name | u8 dtype (1 = f64, 0 = f32)
//   | u32 ndim | u64 extent * ndim | payload.

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

struct Checkpoint {
  std::map<std::string, std::string> manifest;
  std::map<std::string, Tensor> arrays;
};

Checkpoint snapshot(const ParameterStore& store, std::map<std::string, std::string> manifest = {});
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, DType dtype = DType::F64);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies arrays into the store after checking every name and shape. With
/// `strict`, arrays missing from the checkpoint (or unknown to the store) are
/// errors; otherwise only arrays present in both are copied. Optimizer state
/// of loaded parameters is reset.
void load_into(ParameterStore& store, const Checkpoint& ckpt, bool strict = true);

}  // namespace geolab::nn
