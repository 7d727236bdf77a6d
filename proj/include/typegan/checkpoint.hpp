#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "typegan/tensor.hpp"

namespace typegan {

inline constexpr char kHashAlgorithm[] = "fnv1a-64";

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

/// Named float64 tensors plus a JSON metadata block.
///
/// Layout (all integers little-endian):
///   "TGCK" | u32 version | u64 meta_len | meta JSON | u64 count |
///   count x { u32 name_len | name | u8 dtype (0 = f64) | u32 rank |
///             i64 dims[rank] | f64 data[numel] }
/// Tensors are written in name order, so equal content gives equal bytes.
struct Checkpoint {
  nlohmann::ordered_json meta;
  std::map<std::string, Tensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes, const std::string& origin = "<memory>");

/// Writes to a temporary sibling then renames over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Tensors whose names start with `prefix`, with the prefix kept.
std::map<std::string, Tensor> tensors_with_prefix(const Checkpoint& ckpt, std::string_view prefix);

}  // namespace typegan
