#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "scaletrain/architecture.hpp"
#include "scaletrain/network.hpp"
#include "scaletrain/sgd.hpp"

namespace scaletrain {

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Serialized training state: enough to resume bitwise or to resize.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::string_view kMagic{"SCLTCKPT", 8};

  ArchitectureSpec arch;
  std::uint64_t epoch = 0;
  double wall_seconds = 0.0;  // cumulative training time up to `epoch`
  std::uint64_t schedule_fingerprint = 0;
  std::string rng_state;
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> velocity;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Captures a float network plus optimizer velocity.
inline Checkpoint make_checkpoint(const Network<float>& net, const std::vector<Tensor<float>>& velocity,
                                  std::uint64_t epoch, const Rng& rng,
                                  std::uint64_t schedule_fingerprint, double wall_seconds) {
  Checkpoint ck;
  ck.arch = net.architecture();
  ck.epoch = epoch;
  ck.wall_seconds = wall_seconds;
  ck.schedule_fingerprint = schedule_fingerprint;
  ck.rng_state = rng.state();
  const auto names = net.parameter_names();
  const auto params = net.parameters();
  for (std::size_t i = 0; i < names.size(); ++i) {
    ck.params.push_back({names[i], *params[i]});
    ck.velocity.push_back({names[i], i < velocity.size() ? velocity[i] : Tensor<float>(params[i]->shape())});
  }
  return ck;
}

namespace detail {
inline const Tensor<float>& find_slot(const std::vector<NamedTensor>& blocks, const std::string& name,
                                      const Shape& shape, const char* group) {
  const Tensor<float>* found = nullptr;
  for (const auto& b : blocks) {
    if (b.name != name) continue;
    if (found) throw CorruptCheckpointError(std::string(group) + " slot '" + name + "' appears twice");
    found = &b.tensor;
  }
  if (!found) throw ArchitectureMismatchError(std::string(group) + " slot '" + name + "' missing");
  if (found->shape() != shape) {
    throw ArchitectureMismatchError(std::string(group) + " slot '" + name + "' has shape " +
                                    shape_string(found->shape()) + ", architecture needs " +
                                    shape_string(shape));
  }
  return *found;
}
}  // namespace detail

/// Rebuilds the network; every slot must be present once with the right shape.
inline Network<float> network_from_checkpoint(const Checkpoint& ck) {
  Network<float> net(ck.arch);
  const auto names = net.parameter_names();
  auto params = net.parameters();
  if (ck.params.size() != names.size()) {
    throw ArchitectureMismatchError("checkpoint has " + std::to_string(ck.params.size()) +
                                    " parameter tensors, architecture needs " +
                                    std::to_string(names.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    *params[i] = detail::find_slot(ck.params, names[i], params[i]->shape(), "parameter");
  }
  return net;
}

inline std::vector<Tensor<float>> velocity_from_checkpoint(const Checkpoint& ck, const Network<float>& net) {
  const auto names = net.parameter_names();
  const auto params = net.parameters();
  std::vector<Tensor<float>> v;
  for (std::size_t i = 0; i < names.size(); ++i) {
    v.push_back(detail::find_slot(ck.velocity, names[i], params[i]->shape(), "velocity"));
  }
  return v;
}

// ------------------------------------------------------------ binary codec

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void tensor(const NamedTensor& t) {
    str(t.name);
    u32(static_cast<std::uint32_t>(t.tensor.rank()));
    for (auto d : t.tensor.shape()) u64(d);
    for (float v : t.tensor.values()) u32(std::bit_cast<std::uint32_t>(v));
  }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  NamedTensor tensor() {
    NamedTensor t;
    t.name = str();
    const auto rank = u32();
    if (rank == 0 || rank > 4) throw CorruptCheckpointError(path_ + ": tensor '" + t.name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = u64();
    const std::size_t n = shape_size(shape);
    if (n == 0 || n > (bytes_.size() - pos_) / 4) need(n * 4);
    std::vector<float> values(n);
    for (auto& v : values) v = std::bit_cast<float>(u32());
    t.tensor = Tensor<float>(std::move(shape), std::move(values));
    return t;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw CorruptCheckpointError(path_ + ": truncated checkpoint at byte " + std::to_string(pos_));
    }
  }
  std::string_view bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

/// Layout (little-endian): 8-byte magic, u32 version, then the payload
/// [arch text, epoch, wall seconds, schedule fingerprint, RNG state,
/// parameter blocks, velocity blocks], then u32 CRC32 of version+payload.
/// Strings and the architecture are u32 length-prefixed; a tensor block is
/// name, u32 rank, u64 dims, f32 values.
inline std::string encode_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.u32(Checkpoint::kVersion);
  w.str(to_text(ck.arch));
  w.u64(ck.epoch);
  w.f64(ck.wall_seconds);
  w.u64(ck.schedule_fingerprint);
  w.str(ck.rng_state);
  w.u32(static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& t : ck.params) w.tensor(t);
  w.u32(static_cast<std::uint32_t>(ck.velocity.size()));
  for (const auto& t : ck.velocity) w.tensor(t);
  const auto crc = detail::crc32_of(w.bytes());
  w.u32(crc);
  return std::string(Checkpoint::kMagic) + w.bytes();
}

inline Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < Checkpoint::kMagic.size() + 8) {
    throw CorruptCheckpointError(origin + ": truncated checkpoint (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (bytes.substr(0, Checkpoint::kMagic.size()) != Checkpoint::kMagic) {
    throw BadMagicError(origin + ": not a checkpoint (bad magic)");
  }
  const auto body = bytes.substr(Checkpoint::kMagic.size());
  detail::ByteReader head(body, origin);
  const auto version = head.u32();
  if (version != Checkpoint::kVersion) {
    throw VersionMismatchError(origin + ": checkpoint version " + std::to_string(version) +
                               ", expected " + std::to_string(Checkpoint::kVersion));
  }
  const auto payload = body.substr(0, body.size() - 4);
  detail::ByteReader tail(body.substr(body.size() - 4), origin);
  if (tail.u32() != detail::crc32_of(payload)) {
    throw ChecksumError(origin + ": checkpoint CRC32 mismatch");
  }
  detail::ByteReader r(payload, origin);
  r.u32();
  Checkpoint ck;
  try {
    ck.arch = parse_architecture(r.str());
  } catch (const ParseError& e) {
    throw CorruptCheckpointError(origin + ": embedded architecture invalid: " + e.what());
  }
  ck.epoch = r.u64();
  ck.wall_seconds = r.f64();
  ck.schedule_fingerprint = r.u64();
  ck.rng_state = r.str();
  const auto n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) ck.params.push_back(r.tensor());
  const auto n_velocity = r.u32();
  for (std::uint32_t i = 0; i < n_velocity; ++i) ck.velocity.push_back(r.tensor());
  if (r.pos() != payload.size()) throw CorruptCheckpointError(origin + ": trailing bytes in checkpoint");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path);
}

}  // namespace scaletrain
