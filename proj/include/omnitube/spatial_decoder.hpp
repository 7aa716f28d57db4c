#pragma once

// Spatial omni-object decoder: N_q text-guided queries per frame, refined by
// per-frame self-attention, per-query temporal attention and frame-local
// cross-attention, then decoded into boxes and token-position distributions.

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "omnitube/config.hpp"
#include "omnitube/nn.hpp"
#include "omnitube/query_init.hpp"
#include "omnitube/tensor.hpp"

namespace omnitube {

/// Queries stored frame-major: row (frame * num_queries + query).
struct SpatialQuerySet {
  std::size_t frames = 0;
  std::size_t num_queries = 0;
  Tensor queries;  // [frames * num_queries x D]

  std::size_t index(std::size_t frame, std::size_t query) const { return frame * num_queries + query; }
};

struct SpatialLayerParams {
  AttentionBlockParams spatial;   // within a frame, across queries
  AttentionBlockParams temporal;  // within a query index, across frames
  AttentionBlockParams cross;     // queries against that frame's appearance + text tokens
};

struct SpatialDecoderParams {
  Tensor query_embed;  // [N_q x D]
  std::vector<SpatialLayerParams> layers;
  MlpParams box_head;    // D -> D -> D -> 4
  MlpParams class_head;  // D -> D -> class slots
};

struct SpatialPredictions {
  Tensor boxes;         // [N_v x N_q x 4] (cx, cy, w, h) in (0,1)
  Tensor class_logits;  // [N_v x N_q x S]
  Tensor class_probs;   // [N_v x N_q x S], last slot = no object
};

inline std::array<std::size_t, 4> box_head_widths(std::size_t d) { return {d, d, d, 4}; }
inline std::array<std::size_t, 3> class_head_widths(std::size_t d, std::size_t slots) { return {d, d, slots}; }

inline void spec_spatial_decoder(std::vector<ParamSpec>& out, const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  out.push_back({"spatial.query_embed", {cfg.num_queries, d}, ParamKind::embedding});
  for (std::size_t k = 0; k < cfg.decoder_layers; ++k) {
    const std::string name = "spatial.layer" + std::to_string(k);
    spec_attention_block(out, name + ".spatial", d, cfg.ffn());
    spec_attention_block(out, name + ".temporal", d, cfg.ffn());
    spec_attention_block(out, name + ".cross", d, cfg.ffn());
  }
  spec_mlp(out, "spatial.box_head", box_head_widths(d));
  spec_mlp(out, "spatial.class_head", class_head_widths(d, cfg.class_slots()));
}

inline SpatialDecoderParams bind_spatial_decoder(const ParamSet& set, const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  SpatialDecoderParams p;
  p.query_embed = detail::fetch(set, "spatial.query_embed", {cfg.num_queries, d});
  for (std::size_t k = 0; k < cfg.decoder_layers; ++k) {
    const std::string name = "spatial.layer" + std::to_string(k);
    p.layers.push_back({bind_attention_block(set, name + ".spatial", d, cfg.ffn(), cfg.heads),
                        bind_attention_block(set, name + ".temporal", d, cfg.ffn(), cfg.heads),
                        bind_attention_block(set, name + ".cross", d, cfg.ffn(), cfg.heads)});
  }
  p.box_head = bind_mlp(set, "spatial.box_head", box_head_widths(d));
  p.class_head = bind_mlp(set, "spatial.class_head", class_head_widths(d, cfg.class_slots()));
  return p;
}

/// q0[i][j] = mean of the M appearance tokens of frame i most similar to the
/// pooled text, plus the learned embedding of query j.
inline SpatialQuerySet generate_spatial_queries(std::span<const Tensor> appearance, std::span<const double> pooled_text,
                                                std::size_t m, const Tensor& query_embed, Similarity kind) {
  require(!appearance.empty(), ErrorKind::empty_input, "no frames");
  const std::size_t d = query_embed.cols();
  SpatialQuerySet q{appearance.size(), query_embed.rows(), Tensor::matrix(appearance.size() * query_embed.rows(), d)};
  for (std::size_t f = 0; f < appearance.size(); ++f) {
    require(appearance[f].cols() == d, ErrorKind::shape_mismatch, "appearance width vs query width");
    const auto content = top_m_mean(appearance[f], pooled_text, m, kind);
    for (std::size_t j = 0; j < q.num_queries; ++j) {
      auto row = q.queries.row(q.index(f, j));
      auto emb = query_embed.row(j);
      for (std::size_t c = 0; c < d; ++c) row[c] = content[c] + emb[c];
    }
  }
  return q;
}

inline SpatialQuerySet decode_spatial_layer(const SpatialQuerySet& in, std::span<const Tensor> appearance,
                                            std::span<const Tensor> text, const SpatialLayerParams& p) {
  require(appearance.size() == in.frames && text.size() == in.frames, ErrorKind::shape_mismatch,
          "decoder frame count mismatch");
  SpatialQuerySet out = in;
  std::vector<std::size_t> idx;

  for (std::size_t f = 0; f < in.frames; ++f) {
    idx.resize(in.num_queries);
    std::iota(idx.begin(), idx.end(), f * in.num_queries);
    scatter_rows(self_attention_block(gather_rows(out.queries, idx), p.spatial), idx, out.queries);
  }
  for (std::size_t j = 0; j < in.num_queries; ++j) {
    idx.resize(in.frames);
    for (std::size_t f = 0; f < in.frames; ++f) idx[f] = out.index(f, j);
    scatter_rows(self_attention_block(gather_rows(out.queries, idx), p.temporal), idx, out.queries);
  }
  for (std::size_t f = 0; f < in.frames; ++f) {
    idx.resize(in.num_queries);
    std::iota(idx.begin(), idx.end(), f * in.num_queries);
    const std::array<Tensor, 2> parts{appearance[f], text[f]};
    const Tensor context = concat_rows(parts);
    scatter_rows(attention_block(gather_rows(out.queries, idx), context, p.cross), idx, out.queries);
  }
  return out;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Box regression: MLP then the logistic map per coordinate.
inline Tensor spatial_head(const SpatialQuerySet& q, const MlpParams& head) {
  Tensor raw = mlp(q.queries, head);
  require(raw.cols() == 4, ErrorKind::shape_mismatch, "box head must emit 4 values");
  for (auto& v : raw.data()) v = logistic(v);
  return raw.reshaped({q.frames, q.num_queries, 4});
}

/// Class logits and their softmax over the slot axis.
inline std::pair<Tensor, Tensor> class_head(const SpatialQuerySet& q, const MlpParams& head) {
  Tensor logits = mlp(q.queries, head);
  logits = logits.reshaped({q.frames, q.num_queries, logits.cols()});
  Tensor probs = softmax(logits, 2);
  return {std::move(logits), std::move(probs)};
}

/// Full spatial branch from fused features to predictions.
inline SpatialPredictions decode_spatial(std::span<const Tensor> appearance, std::span<const Tensor> text,
                                         std::span<const double> pooled_text, const SpatialDecoderParams& p,
                                         std::size_t m, Similarity kind) {
  SpatialQuerySet q = generate_spatial_queries(appearance, pooled_text, m, p.query_embed, kind);
  for (const auto& layer : p.layers) q = decode_spatial_layer(q, appearance, text, layer);
  SpatialPredictions out;
  out.boxes = spatial_head(q, p.box_head);
  std::tie(out.class_logits, out.class_probs) = class_head(q, p.class_head);
  return out;
}

}  // namespace omnitube
