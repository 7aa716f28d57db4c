#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "omnitube/error.hpp"

namespace omnitube {

enum class Similarity { cosine, dot };

/// Position-index mode predicts which query token an object refers to;
/// direct-class mode predicts a closed class vocabulary entry instead.
enum class ClassMode { position_index, direct_class };

inline Similarity parse_similarity(std::string_view s) {
  if (s == "cosine") return Similarity::cosine;
  if (s == "dot") return Similarity::dot;
  throw Error(ErrorKind::invalid_argument, "unknown similarity '" + std::string(s) + "'");
}

inline ClassMode parse_class_mode(std::string_view s) {
  if (s == "position-index") return ClassMode::position_index;
  if (s == "direct-class") return ClassMode::direct_class;
  throw Error(ErrorKind::invalid_argument, "unknown class-head mode '" + std::string(s) + "'");
}

inline std::string_view to_string(ClassMode m) {
  return m == ClassMode::position_index ? "position-index" : "direct-class";
}

inline std::string_view to_string(Similarity s) { return s == Similarity::cosine ? "cosine" : "dot"; }

/// Architecture dimensions. Defaults are desk scale; the published model
/// uses d_model 256 and feature widths 2048/768/768.
struct ModelConfig {
  std::size_t d_model = 32;
  std::size_t heads = 8;
  std::size_t ffn_dim = 0;  // 0 selects 4 * d_model
  std::size_t grid_h = 4;
  std::size_t grid_w = 4;
  std::size_t appearance_dim = 32;
  std::size_t motion_dim = 32;
  std::size_t text_dim = 32;
  std::size_t max_text = 30;
  std::size_t max_frames = 64;
  std::size_t num_queries = 12;
  std::size_t top_m = 5;
  std::size_t encoder_layers = 6;
  std::size_t decoder_layers = 6;
  Similarity similarity = Similarity::cosine;
  ClassMode class_mode = ClassMode::position_index;
  std::size_t num_classes = 0;  // direct-class vocabulary size

  std::size_t grid_cells() const { return grid_h * grid_w; }
  std::size_t ffn() const { return ffn_dim ? ffn_dim : 4 * d_model; }
  /// Width of each class distribution row, including the trailing no-object slot.
  std::size_t class_slots() const {
    return (class_mode == ClassMode::position_index ? max_text : num_classes) + 1;
  }
  std::size_t no_object_slot() const { return class_slots() - 1; }
  std::size_t tokens_per_frame_max() const { return 2 * grid_cells() + max_text; }

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      require(v > 0, ErrorKind::invalid_argument, std::string(name) + " must be positive");
    };
    positive(d_model, "d_model");
    positive(heads, "heads");
    positive(grid_h, "grid_h");
    positive(grid_w, "grid_w");
    positive(appearance_dim, "appearance_dim");
    positive(motion_dim, "motion_dim");
    positive(text_dim, "text_dim");
    positive(max_text, "max_text");
    positive(max_frames, "max_frames");
    positive(num_queries, "num_queries");
    positive(top_m, "top_m");
    require(d_model % heads == 0, ErrorKind::invalid_argument, "d_model must be divisible by heads");
    require(top_m <= grid_cells(), ErrorKind::invalid_argument, "top_m exceeds grid cells");
    if (class_mode == ClassMode::direct_class) positive(num_classes, "num_classes");
  }
};

}  // namespace omnitube
