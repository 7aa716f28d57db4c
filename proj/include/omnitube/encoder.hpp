#pragma once

// Multimodal fusion encoder. Each frame contributes the token group
//   [H*W appearance | H*W motion | N_t text]
// and the whole video sequence is mixed by a stack of self-attention blocks.

#include <cstddef>
#include <vector>

#include "omnitube/config.hpp"
#include "omnitube/features.hpp"
#include "omnitube/nn.hpp"
#include "omnitube/tensor.hpp"

namespace omnitube {

enum class Modality : std::size_t { appearance = 0, motion = 1, text = 2 };

struct TokenLayout {
  std::size_t frames = 0;
  std::size_t cells = 0;
  std::size_t text_tokens = 0;

  std::size_t per_frame() const { return 2 * cells + text_tokens; }
  std::size_t total() const { return frames * per_frame(); }

  /// Position of a token inside its frame group.
  std::size_t within_frame(Modality m, std::size_t index) const {
    switch (m) {
      case Modality::appearance: return index;
      case Modality::motion: return cells + index;
      case Modality::text: return 2 * cells + index;
    }
    return 0;
  }
  std::size_t offset(std::size_t frame, Modality m, std::size_t index) const {
    return frame * per_frame() + within_frame(m, index);
  }
};

struct EncoderParams {
  AffineParams project_appearance;  // [D_a x D]
  AffineParams project_motion;      // [D_m x D]
  AffineParams project_text;        // [D_t x D]
  Tensor position;                  // [max_frames * tokens_per_frame_max x D]
  Tensor type;                      // [3 x D], one row per modality
  std::vector<AttentionBlockParams> blocks;
};

/// Encoder output: the fused sequence plus per-frame modality views.
struct FusedFeatures {
  TokenLayout layout;
  Tensor sequence;                 // [total x D]
  std::vector<Tensor> appearance;  // per frame [cells x D]
  std::vector<Tensor> motion;      // per frame [cells x D]
  std::vector<Tensor> text;        // per frame [text_tokens x D]
};

inline void spec_encoder(std::vector<ParamSpec>& out, const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  spec_affine(out, "encoder.project_appearance", cfg.appearance_dim, d);
  spec_affine(out, "encoder.project_motion", cfg.motion_dim, d);
  spec_affine(out, "encoder.project_text", cfg.text_dim, d);
  out.push_back({"encoder.position", {cfg.max_frames * cfg.tokens_per_frame_max(), d}, ParamKind::embedding});
  out.push_back({"encoder.type", {3, d}, ParamKind::embedding});
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l)
    spec_attention_block(out, "encoder.block" + std::to_string(l), d, cfg.ffn());
}

inline EncoderParams bind_encoder(const ParamSet& set, const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  EncoderParams p;
  p.project_appearance = bind_affine(set, "encoder.project_appearance", cfg.appearance_dim, d);
  p.project_motion = bind_affine(set, "encoder.project_motion", cfg.motion_dim, d);
  p.project_text = bind_affine(set, "encoder.project_text", cfg.text_dim, d);
  p.position = detail::fetch(set, "encoder.position", {cfg.max_frames * cfg.tokens_per_frame_max(), d});
  p.type = detail::fetch(set, "encoder.type", {3, d});
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l)
    p.blocks.push_back(bind_attention_block(set, "encoder.block" + std::to_string(l), d, cfg.ffn(), cfg.heads));
  return p;
}

namespace detail {
inline Tensor float_block(const float* data, std::size_t rows, std::size_t cols) {
  Tensor t = Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) t[i] = data[i];
  return t;
}
}  // namespace detail

/// Projects each modality to width D, lays tokens out per frame and adds the
/// positional (frame, within-frame slot) and modality-type embeddings.
/// `tokens_per_frame_max` is the positional table stride per frame.
inline Tensor assemble_tokens(const FeatureBundle& bundle, const EncoderParams& p, std::size_t tokens_per_frame_max) {
  bundle.validate();
  const std::size_t d = p.type.cols();
  const std::size_t cells = bundle.cells();
  const TokenLayout layout{bundle.frames, cells, bundle.text_tokens};
  require(p.project_appearance.weight.extent(0) == bundle.appearance_dim &&
              p.project_motion.weight.extent(0) == bundle.motion_dim &&
              p.project_text.weight.extent(0) == bundle.text_dim,
          ErrorKind::shape_mismatch, "feature widths do not match encoder projections");
  require(p.project_appearance.weight.extent(1) == d && p.project_motion.weight.extent(1) == d &&
              p.project_text.weight.extent(1) == d,
          ErrorKind::shape_mismatch, "projection output widths differ from model width");
  require(layout.per_frame() <= tokens_per_frame_max, ErrorKind::shape_mismatch,
          "frame token group exceeds positional table stride");
  require(bundle.frames * tokens_per_frame_max <= p.position.rows(), ErrorKind::shape_mismatch,
          "video has more frames than the positional table covers");

  const Tensor text = affine(detail::float_block(bundle.text.data(), bundle.text_tokens, bundle.text_dim),
                             p.project_text);
  Tensor seq = Tensor::matrix(layout.total(), d);
  for (std::size_t f = 0; f < bundle.frames; ++f) {
    const Tensor app = affine(detail::float_block(bundle.appearance_at(f, 0), cells, bundle.appearance_dim),
                              p.project_appearance);
    const Tensor mot =
        affine(detail::float_block(bundle.motion_at(f, 0), cells, bundle.motion_dim), p.project_motion);
    auto place = [&](const Tensor& src, Modality m) {
      for (std::size_t i = 0; i < src.rows(); ++i) {
        const std::size_t slot = layout.within_frame(m, i);
        auto out = seq.row(f * layout.per_frame() + slot);
        auto pos = p.position.row(f * tokens_per_frame_max + slot);
        auto typ = p.type.row(static_cast<std::size_t>(m));
        auto in = src.row(i);
        for (std::size_t c = 0; c < d; ++c) out[c] = in[c] + pos[c] + typ[c];
      }
    };
    place(app, Modality::appearance);
    place(mot, Modality::motion);
    place(text, Modality::text);
  }
  return seq;
}

/// Splits a fused sequence back into per-frame modality views.
inline FusedFeatures deconcat(Tensor sequence, const TokenLayout& layout) {
  require(sequence.rows() == layout.total(), ErrorKind::shape_mismatch, "sequence length does not match layout");
  FusedFeatures out;
  out.layout = layout;
  for (std::size_t f = 0; f < layout.frames; ++f) {
    const std::size_t base = f * layout.per_frame();
    out.appearance.push_back(slice_rows(sequence, base, layout.cells));
    out.motion.push_back(slice_rows(sequence, base + layout.cells, layout.cells));
    out.text.push_back(slice_rows(sequence, base + 2 * layout.cells, layout.text_tokens));
  }
  out.sequence = std::move(sequence);
  return out;
}

/// Runs the block stack over the full video sequence.
inline Tensor encode_sequence(Tensor tokens, std::span<const AttentionBlockParams> blocks) {
  for (const auto& b : blocks) tokens = self_attention_block(tokens, b);
  return tokens;
}

inline FusedFeatures encode(Tensor tokens, const TokenLayout& layout, std::span<const AttentionBlockParams> blocks) {
  return deconcat(encode_sequence(std::move(tokens), blocks), layout);
}

/// Mean text feature: per-frame token means averaged over frames.
inline std::vector<double> pool_text(std::span<const Tensor> text) {
  require(!text.empty(), ErrorKind::empty_input, "no text views to pool");
  const std::size_t d = text.front().cols();
  std::vector<double> pooled(d, 0.0);
  for (const auto& frame : text) {
    require(frame.rows() >= 1 && frame.cols() == d, ErrorKind::shape_mismatch, "text view shape");
    std::vector<double> mean(d, 0.0);
    for (std::size_t t = 0; t < frame.rows(); ++t)
      for (std::size_t c = 0; c < d; ++c) mean[c] += frame(t, c);
    for (std::size_t c = 0; c < d; ++c) pooled[c] += mean[c] / static_cast<double>(frame.rows());
  }
  for (auto& v : pooled) v /= static_cast<double>(text.size());
  return pooled;
}

}  // namespace omnitube
