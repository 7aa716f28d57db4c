#include <gtest/gtest.h>

#include <fstream>

#include "helpers.hpp"
#include "omnitube/checkpoint.hpp"
#include "omnitube/feature_io.hpp"
#include "omnitube/predictions.hpp"
#include "oracles.hpp"

using namespace omnitube;
using namespace testing_helpers;

namespace {

FeatureBundle small_bundle(std::uint64_t seed) {
  Rng rng(seed);
  FeatureBundle b = random_bundle(rng, 3, 2, 2, 4, 3, 5, 6);
  b.seed = seed;
  return b;
}

ErrorKind decode_error(std::string_view bytes) {
  try {
    decode_features(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::empty_input;
}

void put_u32(std::string& bytes, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[offset + static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

}  // namespace

TEST(FeatureFile, RoundTripIsExact) {
  const FeatureBundle b = small_bundle(1);
  EXPECT_EQ(decode_features(encode_features(b)), b);
  const auto dir = oracle::scratch_dir("feature_roundtrip");
  write_features((dir / "x.otf").string(), b);
  EXPECT_EQ(read_features((dir / "x.otf").string()), b);
  const FeatureBundle h = read_feature_header((dir / "x.otf").string());
  EXPECT_EQ(h.frames, 3u);
  EXPECT_EQ(h.text_tokens, 5u);
  EXPECT_EQ(h.seed, 1u);
  EXPECT_TRUE(h.appearance.empty());
}

TEST(FeatureFile, LayoutArithmetic) {
  // 3 frames of a 2x2 grid with 4 appearance channels: 3*4*4 floats, 192 bytes
  const FeatureBundle b = small_bundle(2);
  EXPECT_EQ(b.appearance_size() * sizeof(float), 192u);
  const std::string bytes = encode_features(b);
  EXPECT_EQ(bytes.size(), kFeatureHeaderBytes + 4 * (48 + 36 + 30));
  EXPECT_EQ(bytes.substr(0, 4), "OTFB");
  // the first appearance value sits right after the header, little-endian
  float first;
  std::memcpy(&first, bytes.data() + kFeatureHeaderBytes, 4);
  EXPECT_EQ(first, b.appearance[0]);
  // motion starts after the 192-byte appearance block
  std::memcpy(&first, bytes.data() + kFeatureHeaderBytes + 192, 4);
  EXPECT_EQ(first, b.motion[0]);
}

TEST(FeatureFile, TruncatedPayload) {
  const std::string bytes = encode_features(small_bundle(3));
  for (std::size_t cut : {std::size_t{10}, kFeatureHeaderBytes, bytes.size() - 1})
    EXPECT_EQ(decode_error(std::string_view(bytes).substr(0, cut)), ErrorKind::truncated_payload) << cut;
}

TEST(FeatureFile, TrailingBytes) {
  const std::string bytes = encode_features(small_bundle(4)) + "xx";
  EXPECT_EQ(decode_error(bytes), ErrorKind::malformed_syntax);
}

TEST(FeatureFile, BadMagicAndVersion) {
  std::string bytes = encode_features(small_bundle(5));
  std::string other = bytes;
  other[0] = 'X';
  EXPECT_EQ(decode_error(other), ErrorKind::magic_mismatch);
  EXPECT_EQ(decode_error(""), ErrorKind::magic_mismatch);
  put_u32(bytes, 4, 2);
  EXPECT_EQ(decode_error(bytes), ErrorKind::unsupported_version);
}

TEST(FeatureFile, DimensionOverflowAndZeroDims) {
  std::string bytes = encode_features(small_bundle(6));
  std::string huge = bytes;
  put_u32(huge, 8, 0xFFFFFFFFu);   // frames
  put_u32(huge, 20, 0xFFFFFFFFu);  // appearance_dim
  EXPECT_EQ(decode_error(huge), ErrorKind::dimension_overflow);
  std::string big = bytes;
  put_u32(big, 8, 1u << 20);
  put_u32(big, 20, 1u << 12);
  EXPECT_EQ(decode_error(big), ErrorKind::dimension_overflow);
  std::string zero = bytes;
  put_u32(zero, 32, 0);  // text_dim
  EXPECT_EQ(decode_error(zero), ErrorKind::shape_mismatch);
}

TEST(FeatureFile, NonFiniteValuesRejected) {
  std::string bytes = encode_features(small_bundle(7));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + kFeatureHeaderBytes + 8, &nan, 4);
  EXPECT_EQ(decode_error(bytes), ErrorKind::invariant_violation);
}

TEST(FeatureFile, MissingFileIsIoError) {
  try {
    read_features("/nonexistent/x.otf");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io_error);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ModelConfig c = toy_config();
  const Checkpoint ck{77, init_params(77, model_param_spec(c))};
  const Checkpoint back = decode_checkpoint(encode_checkpoint(ck));
  EXPECT_EQ(back.seed, 77u);
  EXPECT_TRUE(back.params == ck.params);
  const auto dir = oracle::scratch_dir("checkpoint_roundtrip");
  write_checkpoint((dir / "m.otc").string(), ck);
  const Checkpoint disk = read_checkpoint((dir / "m.otc").string());
  EXPECT_TRUE(disk.params == ck.params);
  // a model built from it predicts exactly like the original
  Rng rng(1);
  const FeatureBundle b = random_bundle(rng, 3, 4, 4, 24, 20, 5, 16);
  EXPECT_EQ(Model(c, disk.params).forward(b).spatial.boxes, Model(c, ck.params).forward(b).spatial.boxes);
}

TEST(Checkpoint, CorruptFilesRejected) {
  const Checkpoint ck{1, init_params(1, model_param_spec(toy_config()))};
  const std::string bytes = encode_checkpoint(ck);
  auto kind = [](std::string_view b) {
    try {
      decode_checkpoint(b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::empty_input;
  };
  EXPECT_EQ(kind(std::string_view(bytes).substr(0, bytes.size() - 3)), ErrorKind::truncated_payload);
  EXPECT_EQ(kind(bytes + "z"), ErrorKind::malformed_syntax);
  EXPECT_EQ(kind("OTFB" + bytes.substr(4)), ErrorKind::magic_mismatch);
}

TEST(Checkpoint, ShapeMismatchOnBind) {
  ModelConfig c = toy_config();
  const ParamSet set = init_params(1, model_param_spec(c));
  c.d_model = 16;
  EXPECT_THROW(Model(c, set), Error);
}

TEST(Predictions, JsonRoundTrip) {
  VideoPrediction p{"v1", {2, 3}, {}};
  p.tubes.push_back({"dog", 1, 2, 2, {2, 3}, {{0.1, 0.2, 0.3, 0.4}, {0.5, 0.6, 0.7, 0.8}}});
  p.tubes.push_back({"cat", 4, 4, 4, {3, 3}, {{1.0 / 3, 0.2, 0.1, 0.1}}});
  const auto dir = oracle::scratch_dir("predictions_roundtrip");
  std::ofstream(dir / "p.json") << predictions_to_json({p}, 9).dump(2);
  const auto back = load_predictions((dir / "p.json").string());
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back.at("v1"), p);
}

TEST(Predictions, MalformedFiles) {
  const auto dir = oracle::scratch_dir("predictions_bad");
  std::ofstream(dir / "a.json") << "{\"version\": 1, \"predictions\": [ {\"video_id\": 3} ]}";
  try {
    load_predictions((dir / "a.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::malformed_syntax);
  }
  std::ofstream(dir / "b.json")
      << R"({"version": 1, "predictions": [{"video_id": "x", "segment": [0, 1], "tubes": [)"
      << R"({"word": "a", "span": [0, 0], "segment": [0, 1], "boxes": [[0.5, 0.5, 0.1, 0.1]]}]}]})";
  EXPECT_THROW(load_predictions((dir / "b.json").string()), Error);
}

TEST(RawOutputs, JsonRoundTripIsExact) {
  const ModelConfig c = toy_config();
  Rng rng(2);
  const FeatureBundle b = random_bundle(rng, 4, 4, 4, 24, 20, 5, 16);
  const RawOutput r = raw_output("v", Model::initialized(c, 3).forward(b));
  const auto dir = oracle::scratch_dir("raw_roundtrip");
  std::ofstream(dir / "r.json") << raw_outputs_to_json({r}, 3).dump();
  const auto back = load_raw_outputs((dir / "r.json").string());
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].boxes, r.boxes);
  EXPECT_EQ(back[0].class_probs, r.class_probs);
  EXPECT_EQ(back[0].temporal_probs, r.temporal_probs);
  EXPECT_EQ(back[0].segment, r.segment);
}
