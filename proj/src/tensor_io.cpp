#include "latsum/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace latsum {

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

void put_bytes(std::vector<char>& buf, const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  buf.insert(buf.end(), p, p + n);
}

void put_u32(std::vector<char>& buf, std::uint32_t v) { put_bytes(buf, &v, 4); }

struct Reader {
  const std::vector<char>& buf;
  std::size_t at = 0;
  void read(void* out, std::size_t n) {
    if (at + n > buf.size()) throw TensorIoError("tensor file truncated");
    std::memcpy(out, buf.data() + at, n);
    at += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, 4);
    return v;
  }
};

}  // namespace

void write_tensor(const std::string& path, const TensorVariant& tensor) {
  std::vector<char> buf;
  put_bytes(buf, kTensorMagic, sizeof(kTensorMagic));
  buf.push_back(char(kTensorFormatVersion));
  const bool canonical = std::holds_alternative<CanonicalTensor<double>>(tensor);
  buf.push_back(canonical ? 'C' : 'T');
  buf.push_back(0);
  buf.push_back(0);
  buf.push_back(0);
  if (canonical) {
    const auto& t = std::get<CanonicalTensor<double>>(tensor);
    for (int l = 0; l < 3; ++l) put_u32(buf, std::uint32_t(t.dims()[l]));
    put_u32(buf, std::uint32_t(t.rank()));
    put_bytes(buf, t.weights().data(), sizeof(double) * std::size_t(t.rank()));
    for (int l = 0; l < 3; ++l)
      put_bytes(buf, t.factor(l).data(), sizeof(double) * std::size_t(t.factor(l).size()));
  } else {
    const auto& t = std::get<TuckerTensor<double>>(tensor);
    for (int l = 0; l < 3; ++l) put_u32(buf, std::uint32_t(t.dims()[l]));
    for (int l = 0; l < 3; ++l) put_u32(buf, std::uint32_t(t.ranks()[l]));
    put_bytes(buf, t.core().data().data(), sizeof(double) * std::size_t(t.core().size()));
    for (int l = 0; l < 3; ++l)
      put_bytes(buf, t.factor(l).data(), sizeof(double) * std::size_t(t.factor(l).size()));
  }
  const std::uint64_t sum = fnv1a64(buf.data(), buf.size());
  put_bytes(buf, &sum, 8);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw TensorIoError("cannot open " + path + " for writing");
  os.write(buf.data(), std::streamsize(buf.size()));
  if (!os) throw TensorIoError("short write to " + path);
}

TensorVariant read_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorIoError("cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kTensorMagic) + 1 + 4 + 12 + 8) throw TensorIoError("tensor file truncated");

  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  const std::uint64_t actual = fnv1a64(buf.data(), buf.size() - 8);
  if (stored != actual)
    throw TensorIoError("checksum mismatch in " + path + " (corrupt or tampered file)");

  Reader r{buf};
  char magic[7];
  r.read(magic, 7);
  if (std::memcmp(magic, kTensorMagic, 7) != 0) throw TensorIoError(path + ": bad magic");
  unsigned char version;
  r.read(&version, 1);
  if (version != kTensorFormatVersion)
    throw TensorIoError(path + ": unsupported format version " + std::to_string(int(version)));
  char tag;
  r.read(&tag, 1);
  r.at += 3;  // padding

  Dims3 dims;
  for (int l = 0; l < 3; ++l) dims[l] = Index(r.u32());

  if (tag == 'C') {
    const Index rank = Index(r.u32());
    VectorX<double> w(rank);
    r.read(w.data(), sizeof(double) * std::size_t(rank));
    std::array<MatrixX<double>, 3> f;
    for (int l = 0; l < 3; ++l) {
      f[l].resize(dims[l], rank);
      r.read(f[l].data(), sizeof(double) * std::size_t(f[l].size()));
    }
    return CanonicalTensor<double>(dims, std::move(w), std::move(f));
  }
  if (tag == 'T') {
    Dims3 ranks;
    for (int l = 0; l < 3; ++l) ranks[l] = Index(r.u32());
    Tensor3<double> core(ranks);
    r.read(core.data().data(), sizeof(double) * std::size_t(core.size()));
    std::array<MatrixX<double>, 3> f;
    for (int l = 0; l < 3; ++l) {
      f[l].resize(dims[l], ranks[l]);
      r.read(f[l].data(), sizeof(double) * std::size_t(f[l].size()));
    }
    return TuckerTensor<double>(dims, std::move(core), std::move(f));
  }
  throw TensorIoError(path + ": unknown format tag");
}

}  // namespace latsum
