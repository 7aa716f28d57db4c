#pragma once

// End-to-end forward pass: encoder -> spatial and temporal decoders -> heads.

#include <cstdint>
#include <vector>

#include "omnitube/config.hpp"
#include "omnitube/encoder.hpp"
#include "omnitube/features.hpp"
#include "omnitube/nn.hpp"
#include "omnitube/spatial_decoder.hpp"
#include "omnitube/temporal_decoder.hpp"

namespace omnitube {

inline std::vector<ParamSpec> model_param_spec(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> specs;
  spec_encoder(specs, cfg);
  spec_spatial_decoder(specs, cfg);
  spec_temporal_decoder(specs, cfg);
  return specs;
}

struct ModelParams {
  EncoderParams encoder;
  SpatialDecoderParams spatial;
  TemporalDecoderParams temporal;
};

inline ModelParams bind_model(const ParamSet& set, const ModelConfig& cfg) {
  cfg.validate();
  return {bind_encoder(set, cfg), bind_spatial_decoder(set, cfg), bind_temporal_decoder(set, cfg)};
}

/// Raw per-video outputs of the network.
struct PredictionSet {
  SpatialPredictions spatial;
  TemporalPrediction temporal;
};

class Model {
 public:
  Model(ModelConfig cfg, const ParamSet& params) : cfg_(std::move(cfg)), params_(bind_model(params, cfg_)) {}

  static Model initialized(const ModelConfig& cfg, std::uint64_t seed) {
    const auto specs = model_param_spec(cfg);
    return Model(cfg, init_params(seed, specs));
  }

  const ModelConfig& config() const { return cfg_; }
  const ModelParams& params() const { return params_; }

  void check_bundle(const FeatureBundle& b) const {
    require(b.grid_h == cfg_.grid_h && b.grid_w == cfg_.grid_w, ErrorKind::shape_mismatch,
            "feature grid does not match model grid");
    require(b.appearance_dim == cfg_.appearance_dim && b.motion_dim == cfg_.motion_dim &&
                b.text_dim == cfg_.text_dim,
            ErrorKind::shape_mismatch, "feature widths do not match model configuration");
    require(b.text_tokens <= cfg_.max_text, ErrorKind::shape_mismatch, "text longer than max_text");
    require(b.frames <= cfg_.max_frames, ErrorKind::shape_mismatch, "video longer than max_frames");
  }

  FusedFeatures encode(const FeatureBundle& bundle) const {
    check_bundle(bundle);
    const TokenLayout layout{bundle.frames, bundle.cells(), bundle.text_tokens};
    return omnitube::encode(assemble_tokens(bundle, params_.encoder, cfg_.tokens_per_frame_max()), layout,
                            params_.encoder.blocks);
  }

  PredictionSet forward(const FeatureBundle& bundle) const {
    const FusedFeatures fused = encode(bundle);
    const auto pooled = pool_text(fused.text);
    PredictionSet out;
    out.spatial = decode_spatial(fused.appearance, fused.text, pooled, params_.spatial, cfg_.top_m, cfg_.similarity);
    out.temporal = decode_temporal(fused.motion, fused.text, pooled, params_.temporal, cfg_.top_m, cfg_.similarity);
    return out;
  }

 private:
  ModelConfig cfg_;
  ModelParams params_;
};

}  // namespace omnitube
