#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "focus/tensor.hpp"

namespace focus {

/// Integer payloads (token ids, targets) live beside real/complex tensors in
/// the same container but never take part in differentiation.
struct IntTensor {
  Shape shape;
  std::vector<int64_t> data;
};

struct NamedTensor {
  std::string name;
  std::variant<Tensor, IntTensor> value;
};

// Container layout, all integers little-endian:
//   "FOCUS1" | u64 count | count x record
//   record = u32 name_len | name bytes (UTF-8) | u8 dtype | u32 rank |
//            rank x u64 extent | values
// dtype: 0 = real64, 1 = complex128 (re, im pairs), 2 = int64.
inline constexpr char kContainerMagic[6] = {'F', 'O', 'C', 'U', 'S', '1'};

void write_named_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_named_tensors(std::istream& is);

void save_named_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
// Throws FormatError on a bad magic, truncation or unknown dtype tag.
std::vector<NamedTensor> load_named_tensors(const std::filesystem::path& path);

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace focus
