#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "latsum/canonical.hpp"
#include "latsum/tucker.hpp"

namespace latsum {

/// Binary tensor file layout (all integers and floats little-endian):
///   byte 0..6   magic "LTSTNSR"
///   byte 7      format version (1)
///   byte 8      format tag: 'C' canonical | 'T' tucker
///   byte 9..11  zero padding
///   byte 12..23 mode sizes, 3 x uint32
///   canonical:  uint32 rank R, then f64 payload: R weights,
///               then the three side matrices column-major (mode 1, 2, 3)
///   tucker:     3 x uint32 ranks, then f64 payload: core (first index
///               fastest), then the three factors column-major
///   tail        uint64 FNV-1a checksum of every preceding byte
inline constexpr char kTensorMagic[7] = {'L', 'T', 'S', 'T', 'N', 'S', 'R'};
inline constexpr std::uint8_t kTensorFormatVersion = 1;

using TensorVariant = std::variant<CanonicalTensor<double>, TuckerTensor<double>>;

class TensorIoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull);

void write_tensor(const std::string& path, const TensorVariant& tensor);
TensorVariant read_tensor(const std::string& path);

}  // namespace latsum
