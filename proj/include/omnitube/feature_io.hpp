#pragma once

// Binary feature files (.otf).
//
//   offset  size  field
//   0       4     magic "OTFB"
//   4       4     u32 version (1)
//   8       28    u32 frames, grid_h, grid_w, appearance_dim, motion_dim,
//                 text_tokens, text_dim
//   36      4     u32 reserved (0)
//   40      8     u64 seed
//   48      ...   f32 appearance, then motion, then text, row-major
//
// All integers and floats are little-endian. The payload length must equal
// exactly what the header implies.

#include <array>
#include <string>
#include <string_view>

#include "omnitube/binary_io.hpp"
#include "omnitube/features.hpp"

namespace omnitube {

inline constexpr std::string_view kFeatureMagic = "OTFB";
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 48;
/// Upper bound on the number of floats in one file.
inline constexpr std::uint64_t kMaxFeatureValues = std::uint64_t{1} << 31;

namespace detail {
/// a*b, or 0 when the product leaves the accepted range.
inline std::uint64_t bounded_product(std::initializer_list<std::uint64_t> xs) {
  std::uint64_t p = 1;
  for (auto x : xs) {
    if (x != 0 && p > kMaxFeatureValues / x) return 0;
    p *= x;
  }
  return p;
}
}  // namespace detail

inline std::string encode_features(const FeatureBundle& b) {
  b.validate();
  ByteWriter w;
  w.raw(kFeatureMagic);
  w.u32(kFeatureVersion);
  for (auto v : {b.frames, b.grid_h, b.grid_w, b.appearance_dim, b.motion_dim, b.text_tokens, b.text_dim}) w.u32(v);
  w.u32(0);
  w.u64(b.seed);
  for (const auto* block : {&b.appearance, &b.motion, &b.text})
    for (float v : *block) w.f32(v);
  return w.bytes();
}

inline FeatureBundle decode_features(std::string_view bytes) {
  ByteReader r(bytes);
  require(r.remaining() >= kFeatureMagic.size() && bytes.substr(0, 4) == kFeatureMagic, ErrorKind::magic_mismatch,
          "not a feature file (bad magic)");
  r.raw(4, "magic");
  const auto version = r.u32("header");
  require(version == kFeatureVersion, ErrorKind::unsupported_version,
          "feature file version " + std::to_string(version));
  FeatureBundle b;
  std::array<std::uint32_t*, 7> dims{&b.frames, &b.grid_h, &b.grid_w, &b.appearance_dim,
                                     &b.motion_dim, &b.text_tokens, &b.text_dim};
  for (auto* d : dims) *d = r.u32("header");
  r.u32("header");
  b.seed = r.u64("header");
  for (auto* d : dims) require(*d > 0, ErrorKind::shape_mismatch, "feature header has a zero dimension");

  const std::uint64_t cells = detail::bounded_product({b.frames, b.grid_h, b.grid_w});
  const std::uint64_t na = detail::bounded_product({cells, b.appearance_dim});
  const std::uint64_t nm = detail::bounded_product({cells, b.motion_dim});
  const std::uint64_t nt = detail::bounded_product({b.text_tokens, b.text_dim});
  require(cells && na && nm && nt && na + nm + nt <= kMaxFeatureValues, ErrorKind::dimension_overflow,
          "feature header dimensions exceed the supported size");
  const std::uint64_t payload = 4 * (na + nm + nt);
  r.need(payload, "feature payload");
  require(r.remaining() == payload, ErrorKind::malformed_syntax,
          std::to_string(r.remaining() - payload) + " trailing bytes after feature payload");
  auto fill = [&](std::vector<float>& v, std::uint64_t n) {
    v.resize(n);
    for (auto& x : v) x = r.f32("feature payload");
  };
  fill(b.appearance, na);
  fill(b.motion, nm);
  fill(b.text, nt);
  b.validate();
  return b;
}

inline void write_features(const std::string& path, const FeatureBundle& b) { write_file(path, encode_features(b)); }
inline FeatureBundle read_features(const std::string& path) { return decode_features(read_file(path)); }

/// Header-only read for validation passes; avoids loading the payload.
inline FeatureBundle read_feature_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  std::string head(kFeatureHeaderBytes, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  require(head.size() >= 4 && std::string_view(head).substr(0, 4) == kFeatureMagic, ErrorKind::magic_mismatch,
          "not a feature file (bad magic)");
  ByteReader r(head);
  r.raw(4, "magic");
  const auto version = r.u32("header");
  require(version == kFeatureVersion, ErrorKind::unsupported_version,
          "feature file version " + std::to_string(version));
  FeatureBundle b;
  for (auto* d : {&b.frames, &b.grid_h, &b.grid_w, &b.appearance_dim, &b.motion_dim, &b.text_tokens, &b.text_dim})
    *d = r.u32("header");
  r.u32("header");
  b.seed = r.u64("header");
  return b;
}

}  // namespace omnitube
