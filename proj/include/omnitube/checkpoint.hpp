#pragma once

// Parameter checkpoints (.otc).
//
//   magic "OTCK", u32 version (1), u64 seed, u32 tensor count,
//   per tensor: u32 name length, name bytes, u32 rank, rank x u32 extents,
//   then every tensor's values as f32 in directory order.
//
// Little-endian throughout. Parameters are kept at float precision, so a
// write/read cycle reproduces them bit for bit.

#include <string>

#include "omnitube/binary_io.hpp"
#include "omnitube/nn.hpp"

namespace omnitube {

inline constexpr std::string_view kCheckpointMagic = "OTCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t seed = 0;
  ParamSet params;
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(ck.seed);
  w.u32(static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& [name, t] : ck.params.items()) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
  }
  for (const auto& item : ck.params.items())
    for (double v : item.value.data()) w.f32(static_cast<float>(v));
  return w.bytes();
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  require(bytes.size() >= 4 && bytes.substr(0, 4) == kCheckpointMagic, ErrorKind::magic_mismatch,
          "not a checkpoint (bad magic)");
  ByteReader r(bytes);
  r.raw(4, "magic");
  const auto version = r.u32("header");
  require(version == kCheckpointVersion, ErrorKind::unsupported_version,
          "checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.seed = r.u64("header");
  const auto count = r.u32("header");
  std::vector<std::pair<std::string, Shape>> dir;
  std::uint64_t total = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.u32("tensor directory");
    std::string name(r.raw(len, "tensor directory"));
    const auto rank = r.u32("tensor directory");
    require(rank >= 1 && rank <= 8, ErrorKind::dimension_overflow,
            "tensor " + name + " has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto e = r.u32("tensor directory");
      require(e > 0, ErrorKind::shape_mismatch, "tensor " + name + " has a zero extent");
      n *= e;
      require(n <= (std::uint64_t{1} << 31), ErrorKind::dimension_overflow, "tensor " + name + " is too large");
      shape.push_back(e);
    }
    total += n;
    require(total <= (std::uint64_t{1} << 31), ErrorKind::dimension_overflow, "checkpoint is too large");
    dir.emplace_back(std::move(name), std::move(shape));
  }
  r.need(4 * total, "checkpoint payload");
  require(r.remaining() == 4 * total, ErrorKind::malformed_syntax, "trailing bytes after checkpoint payload");
  for (auto& [name, shape] : dir) {
    Tensor t(shape);
    for (auto& v : t.data()) v = r.f32("checkpoint payload");
    ck.params.add(name, std::move(t));
  }
  return ck;
}

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) { write_file(path, encode_checkpoint(ck)); }
inline Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace omnitube
