#pragma once

// Small builders shared by the test suites.

#include <vector>

#include "omnitube/config.hpp"
#include "omnitube/features.hpp"
#include "omnitube/nn.hpp"
#include "omnitube/random.hpp"

namespace testing_helpers {

using namespace omnitube;

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

/// A block with randomized parameters, including non-trivial norm scales.
inline AttentionBlockParams random_block(std::uint64_t seed, std::size_t d, std::size_t ffn, std::size_t heads) {
  std::vector<ParamSpec> specs;
  spec_attention_block(specs, "b", d, ffn);
  ParamSet set = init_params(seed, specs);
  Rng rng(seed ^ 0xABCDEFULL);
  for (const char* n : {"b.norm1.gamma", "b.norm1.beta", "b.norm2.gamma", "b.norm2.beta", "b.attn.query.bias",
                        "b.attn.value.bias", "b.ff_in.bias"})
    for (auto& v : set.get(n).data()) v += 0.1 * rng.normal();
  return bind_attention_block(set, "b", d, ffn, heads);
}

inline AttentionParams random_attention(std::uint64_t seed, std::size_t d, std::size_t heads) {
  auto p = random_block(seed, d, d, heads).attention;
  return p;
}

inline MlpParams random_mlp(std::uint64_t seed, std::vector<std::size_t> widths) {
  std::vector<ParamSpec> specs;
  spec_mlp(specs, "m", widths);
  ParamSet set = init_params(seed, specs);
  Rng rng(seed + 1);
  for (const auto& item : set.items())
    if (item.name.ends_with(".bias"))
      for (auto& v : set.get(item.name).data()) v = 0.1 * rng.normal();
  return bind_mlp(set, "m", widths);
}

inline FeatureBundle random_bundle(Rng& rng, std::uint32_t frames, std::uint32_t h, std::uint32_t w, std::uint32_t da,
                                   std::uint32_t dm, std::uint32_t nt, std::uint32_t dt) {
  FeatureBundle b;
  b.frames = frames;
  b.grid_h = h;
  b.grid_w = w;
  b.appearance_dim = da;
  b.motion_dim = dm;
  b.text_tokens = nt;
  b.text_dim = dt;
  b.appearance.resize(b.appearance_size());
  b.motion.resize(b.motion_size());
  b.text.resize(b.text_size());
  for (auto* block : {&b.appearance, &b.motion, &b.text})
    for (auto& v : *block) v = static_cast<float>(rng.normal());
  return b;
}

/// Toy configuration used across decoder and pipeline tests.
inline ModelConfig toy_config() {
  ModelConfig c;
  c.d_model = 32;
  c.heads = 4;
  c.grid_h = 4;
  c.grid_w = 4;
  c.appearance_dim = 24;
  c.motion_dim = 20;
  c.text_dim = 16;
  c.max_text = 12;
  c.max_frames = 16;
  c.num_queries = 8;
  c.top_m = 5;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  return c;
}

}  // namespace testing_helpers
