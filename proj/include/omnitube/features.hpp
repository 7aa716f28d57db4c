#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "omnitube/error.hpp"

namespace omnitube {

/// Precomputed per-video backbone features.
/// appearance: [frames x grid_h x grid_w x appearance_dim]
/// motion:     [frames x grid_h x grid_w x motion_dim]
/// text:       [text_tokens x text_dim]
struct FeatureBundle {
  std::uint32_t frames = 0;
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
  std::uint32_t appearance_dim = 0;
  std::uint32_t motion_dim = 0;
  std::uint32_t text_tokens = 0;
  std::uint32_t text_dim = 0;
  std::uint64_t seed = 0;  // provenance only
  std::vector<float> appearance;
  std::vector<float> motion;
  std::vector<float> text;

  std::size_t cells() const { return std::size_t{grid_h} * grid_w; }
  std::size_t appearance_size() const { return std::size_t{frames} * cells() * appearance_dim; }
  std::size_t motion_size() const { return std::size_t{frames} * cells() * motion_dim; }
  std::size_t text_size() const { return std::size_t{text_tokens} * text_dim; }

  /// Feature vector of one grid cell (row-major cell index) in one frame.
  const float* appearance_at(std::size_t frame, std::size_t cell) const {
    return appearance.data() + (frame * cells() + cell) * appearance_dim;
  }
  const float* motion_at(std::size_t frame, std::size_t cell) const {
    return motion.data() + (frame * cells() + cell) * motion_dim;
  }
  const float* text_at(std::size_t token) const { return text.data() + token * text_dim; }

  void validate(std::size_t max_text_tokens = 0) const {
    require(frames >= 1 && grid_h >= 1 && grid_w >= 1, ErrorKind::shape_mismatch, "empty video grid");
    require(appearance_dim >= 1 && motion_dim >= 1 && text_dim >= 1, ErrorKind::shape_mismatch,
            "zero feature width");
    require(text_tokens >= 1, ErrorKind::shape_mismatch, "feature bundle without text tokens");
    if (max_text_tokens)
      require(text_tokens <= max_text_tokens, ErrorKind::shape_mismatch, "text longer than configured maximum");
    require(appearance.size() == appearance_size() && motion.size() == motion_size() && text.size() == text_size(),
            ErrorKind::shape_mismatch, "feature payload does not match declared dimensions");
    for (const auto* block : {&appearance, &motion, &text})
      for (float v : *block) require(std::isfinite(v), ErrorKind::invariant_violation, "non-finite feature value");
  }

  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

}  // namespace omnitube
