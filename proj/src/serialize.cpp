#include "focus/serialize.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace focus {

namespace {

constexpr uint8_t kTagReal = 0;
constexpr uint8_t kTagComplex = 1;
constexpr uint8_t kTagInt = 2;
constexpr uint32_t kMaxRank = 64;

template <class U>
void put_le(std::ostream& os, U v) {
  char buf[sizeof(U)];
  for (size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw FormatError("tensor container truncated");
  }
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

void put_shape(std::ostream& os, const Shape& shape) {
  put_le<uint32_t>(os, static_cast<uint32_t>(shape.size()));
  for (int64_t e : shape) put_le<uint64_t>(os, static_cast<uint64_t>(e));
}

}  // namespace

void write_named_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  os.write(kContainerMagic, sizeof(kContainerMagic));
  put_le<uint64_t>(os, tensors.size());
  for (const auto& nt : tensors) {
    put_le<uint32_t>(os, static_cast<uint32_t>(nt.name.size()));
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    if (const auto* t = std::get_if<Tensor>(&nt.value)) {
      put_le<uint8_t>(os, t->is_complex() ? kTagComplex : kTagReal);
      put_shape(os, t->shape());
      for (double v : t->raw()) put_le<uint64_t>(os, std::bit_cast<uint64_t>(v));
    } else {
      const auto& it = std::get<IntTensor>(nt.value);
      put_le<uint8_t>(os, kTagInt);
      put_shape(os, it.shape);
      for (int64_t v : it.data) put_le<uint64_t>(os, static_cast<uint64_t>(v));
    }
  }
  if (!os) throw FormatError("failed writing tensor container");
}

std::vector<NamedTensor> read_named_tensors(std::istream& is) {
  char magic[sizeof(kContainerMagic)];
  if (!is.read(magic, sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kContainerMagic))) {
    throw FormatError("not a tensor container (bad magic)");
  }
  const auto count = get_le<uint64_t>(is);
  std::vector<NamedTensor> out;
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_len = get_le<uint32_t>(is);
    std::string name(name_len, '\0');
    if (name_len && !is.read(name.data(), name_len)) throw FormatError("tensor container truncated");
    const auto tag = get_le<uint8_t>(is);
    const auto rank = get_le<uint32_t>(is);
    if (rank > kMaxRank) throw FormatError("tensor '" + name + "' has implausible rank");
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<int64_t>(get_le<uint64_t>(is));
    const int64_t n = shape_numel(shape);
    if (tag == kTagReal || tag == kTagComplex) {
      Tensor t = Tensor::zeros(shape, tag == kTagComplex ? DType::Complex128 : DType::Real64);
      for (double& v : t.raw()) v = std::bit_cast<double>(get_le<uint64_t>(is));
      out.push_back({std::move(name), std::move(t)});
    } else if (tag == kTagInt) {
      IntTensor t{shape, std::vector<int64_t>(static_cast<size_t>(n))};
      for (auto& v : t.data) v = static_cast<int64_t>(get_le<uint64_t>(is));
      out.push_back({std::move(name), std::move(t)});
    } else {
      throw FormatError("tensor '" + name + "' has unknown dtype tag " + std::to_string(tag));
    }
  }
  return out;
}

void save_named_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_named_tensors(os, tensors);
}

std::vector<NamedTensor> load_named_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  try {
    return read_named_tensors(is);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

}  // namespace focus
