#pragma once

// Temporal decoder: one motion-guided query per frame, refined by temporal
// self-attention and frame-local cross-attention, decoded into start/end
// distributions over frames.

#include <array>
#include <vector>

#include "omnitube/config.hpp"
#include "omnitube/geometry.hpp"
#include "omnitube/nn.hpp"
#include "omnitube/query_init.hpp"
#include "omnitube/tensor.hpp"

namespace omnitube {

struct TemporalLayerParams {
  AttentionBlockParams temporal;
  AttentionBlockParams cross;  // against that frame's motion + text tokens
};

struct TemporalDecoderParams {
  std::vector<TemporalLayerParams> layers;
  MlpParams head;  // D -> D -> 2
};

struct TemporalPrediction {
  Tensor logits;  // [N_v x 2]
  Tensor probs;   // [N_v x 2], column 0 = start, column 1 = end; each column sums to 1
  Segment segment;
};

inline std::array<std::size_t, 3> temporal_head_widths(std::size_t d) { return {d, d, 2}; }

inline void spec_temporal_decoder(std::vector<ParamSpec>& out, const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  for (std::size_t k = 0; k < cfg.decoder_layers; ++k) {
    const std::string name = "temporal.layer" + std::to_string(k);
    spec_attention_block(out, name + ".temporal", d, cfg.ffn());
    spec_attention_block(out, name + ".cross", d, cfg.ffn());
  }
  spec_mlp(out, "temporal.head", temporal_head_widths(d));
}

inline TemporalDecoderParams bind_temporal_decoder(const ParamSet& set, const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  TemporalDecoderParams p;
  for (std::size_t k = 0; k < cfg.decoder_layers; ++k) {
    const std::string name = "temporal.layer" + std::to_string(k);
    p.layers.push_back({bind_attention_block(set, name + ".temporal", d, cfg.ffn(), cfg.heads),
                        bind_attention_block(set, name + ".cross", d, cfg.ffn(), cfg.heads)});
  }
  p.head = bind_mlp(set, "temporal.head", temporal_head_widths(d));
  return p;
}

/// p0[i] = mean of the M motion tokens of frame i most similar to the pooled text.
inline Tensor generate_temporal_queries(std::span<const Tensor> motion, std::span<const double> pooled_text,
                                        std::size_t m, Similarity kind) {
  require(!motion.empty(), ErrorKind::empty_input, "no frames");
  Tensor p = Tensor::matrix(motion.size(), motion.front().cols());
  for (std::size_t f = 0; f < motion.size(); ++f) {
    const auto mean = top_m_mean(motion[f], pooled_text, m, kind);
    std::copy(mean.begin(), mean.end(), p.row(f).begin());
  }
  return p;
}

inline Tensor decode_temporal_layer(const Tensor& queries, std::span<const Tensor> motion,
                                    std::span<const Tensor> text, const TemporalLayerParams& p) {
  require(queries.rows() == motion.size() && motion.size() == text.size(), ErrorKind::shape_mismatch,
          "temporal decoder frame count mismatch");
  Tensor mixed = self_attention_block(queries, p.temporal);
  Tensor out = mixed;
  for (std::size_t f = 0; f < mixed.rows(); ++f) {
    const std::array<Tensor, 2> parts{motion[f], text[f]};
    const Tensor updated = attention_block(slice_rows(mixed, f, 1), concat_rows(parts), p.cross);
    std::copy(updated.data().begin(), updated.data().end(), out.row(f).begin());
  }
  return out;
}

/// Start/end logits per frame, softmax across frames per channel.
inline std::pair<Tensor, Tensor> temporal_head(const Tensor& queries, const MlpParams& head) {
  Tensor logits = mlp(queries, head);
  require(logits.cols() == 2, ErrorKind::shape_mismatch, "temporal head must emit 2 values per frame");
  Tensor probs = softmax(logits, 0);
  return {std::move(logits), std::move(probs)};
}

/// argmax over s <= e of H_s[s] * H_e[e]; ties resolve to the smallest s,
/// then the smallest e.
inline Segment extract_segment(const Tensor& probs) {
  require(probs.rank() == 2 && probs.cols() == 2 && probs.rows() >= 1, ErrorKind::shape_mismatch,
          "segment decoding expects [N_v x 2]");
  const std::size_t n = probs.rows();
  Segment best{0, 0};
  double best_score = -1.0;
  std::size_t prefix_arg = 0;
  for (std::size_t e = 0; e < n; ++e) {
    if (probs(e, 0) > probs(prefix_arg, 0)) prefix_arg = e;
    const double score = probs(prefix_arg, 0) * probs(e, 1);
    const Segment cand{static_cast<int>(prefix_arg), static_cast<int>(e)};
    if (score > best_score || (score == best_score && cand.start < best.start)) {
      best_score = score;
      best = cand;
    }
  }
  return best;
}

inline TemporalPrediction decode_temporal(std::span<const Tensor> motion, std::span<const Tensor> text,
                                          std::span<const double> pooled_text, const TemporalDecoderParams& p,
                                          std::size_t m, Similarity kind) {
  Tensor q = generate_temporal_queries(motion, pooled_text, m, kind);
  for (const auto& layer : p.layers) q = decode_temporal_layer(q, motion, text, layer);
  TemporalPrediction out;
  std::tie(out.logits, out.probs) = temporal_head(q, p.head);
  out.segment = extract_segment(out.probs);
  return out;
}

}  // namespace omnitube
