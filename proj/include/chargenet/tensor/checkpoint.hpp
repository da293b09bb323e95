#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "chargenet/tensor/parameter.hpp"

namespace chargenet {

// Checkpoint byte layout, all integers and floats little-endian:
//
//   u32 format_version            (kCheckpointVersion)
//   u32 parameter_count
//   repeated parameter_count times:
//     u32 name_length, name bytes (UTF-8, no terminator)
//     u32 rank, u64 dims[rank]
//     f64 values[product(dims)]   (row-major IEEE-754 binary64)

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  unsigned char bytes[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    bits = std::bit_cast<std::uint64_t>(static_cast<double>(v));
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is, const std::string& what) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ParseError("checkpoint truncated reading " + what);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ParameterStore& store) {
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(store.size()));
  store.for_each([&](const Parameter& p) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) detail::put_le<std::uint64_t>(os, d);
    for (double v : p.value.data()) detail::put_le<double>(os, v);
  });
}

inline std::vector<NamedTensor> read_checkpoint(std::istream& is) {
  const auto version = detail::get_le<std::uint32_t>(is, "format version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint format version " + std::to_string(version));
  }
  const auto count = detail::get_le<std::uint32_t>(is, "parameter count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::get_le<std::uint32_t>(is, "name length");
    if (name_len > (1u << 20)) throw ParseError("implausible parameter name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw ParseError("checkpoint truncated reading name");
    const auto rank = detail::get_le<std::uint32_t>(is, "rank of " + name);
    if (rank == 0 || rank > 8) throw ParseError("invalid rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = detail::get_le<std::uint64_t>(is, "shape of " + name);
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = detail::get_le<double>(is, "values of " + name);
    out.push_back({name, Tensor(shape, std::move(values))});
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const ParameterStore& store) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  write_checkpoint(os, store);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

/// Loads values into an existing store; every stored parameter must exist
/// with the same shape and every store parameter must be present.
inline void load_checkpoint(const std::string& path, ParameterStore& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  auto tensors = read_checkpoint(is);
  if (tensors.size() != store.size()) {
    throw ParseError("checkpoint holds " + std::to_string(tensors.size()) + " parameters, model has " +
                     std::to_string(store.size()));
  }
  for (auto& nt : tensors) {
    Parameter* p = store.find(nt.name);
    if (!p) throw ParseError("checkpoint parameter '" + nt.name + "' unknown to the model");
    if (!p->value.same_shape(nt.value)) {
      throw ParseError("checkpoint shape " + shape_string(nt.value.shape()) + " for '" + nt.name +
                       "' does not match model shape " + shape_string(p->value.shape()));
    }
    p->value = std::move(nt.value);
  }
}

}  // namespace chargenet
