#pragma once

// JSON files written by the forward and link steps.
//
// Tube predictions: {"version": 1, "seed": S, "predictions": [{"video_id",
//   "segment": [s, e], "tubes": [{"word", "span": [b, e], "token",
//   "segment": [s, e], "boxes": [[cx, cy, w, h], ...]}]}]}
//
// Raw outputs: {"version": 1, "seed": S, "videos": [{"video_id", "frames",
//   "queries", "slots", "segment": [s, e], "boxes", "class_probs",
//   "temporal_probs"}]} with row-major flattened tensors.

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "omnitube/binary_io.hpp"
#include "omnitube/model.hpp"
#include "omnitube/tube_builder.hpp"

namespace omnitube {

struct VideoPrediction {
  std::string video_id;
  Segment segment;
  std::vector<Tube> tubes;
  friend bool operator==(const VideoPrediction&, const VideoPrediction&) = default;
};

inline nlohmann::json to_json(const Tube& t) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : t.boxes) boxes.push_back({b.cx, b.cy, b.w, b.h});
  return {{"word", t.word},
          {"span", {t.span_begin, t.span_end}},
          {"token", t.token},
          {"segment", {t.segment.start, t.segment.end}},
          {"boxes", std::move(boxes)}};
}

inline Tube tube_from_json(const nlohmann::json& j) {
  Tube t;
  t.word = j.at("word").get<std::string>();
  const auto span = j.at("span").get<std::vector<std::size_t>>();
  require(span.size() == 2, ErrorKind::malformed_syntax, "tube span must be [begin, end]");
  t.span_begin = span[0];
  t.span_end = span[1];
  t.token = j.value("token", t.span_end);
  const auto seg = j.at("segment").get<std::vector<int>>();
  require(seg.size() == 2, ErrorKind::malformed_syntax, "tube segment must be [start, end]");
  t.segment = {seg[0], seg[1]};
  validate(t.segment);
  for (const auto& b : j.at("boxes")) {
    const auto v = b.get<std::vector<double>>();
    require(v.size() == 4, ErrorKind::malformed_syntax, "box must be [cx, cy, w, h]");
    t.boxes.push_back({v[0], v[1], v[2], v[3]});
  }
  require(t.boxes.size() == static_cast<std::size_t>(t.segment.length()), ErrorKind::malformed_syntax,
          "tube needs one box per segment frame");
  return t;
}

inline nlohmann::json predictions_to_json(const std::vector<VideoPrediction>& preds, std::uint64_t seed) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = seed;
  auto& xs = j["predictions"] = nlohmann::json::array();
  for (const auto& p : preds) {
    nlohmann::json tubes = nlohmann::json::array();
    for (const auto& t : p.tubes) tubes.push_back(to_json(t));
    xs.push_back(
        {{"video_id", p.video_id}, {"segment", {p.segment.start, p.segment.end}}, {"tubes", std::move(tubes)}});
  }
  return j;
}

/// Predictions keyed by video id.
inline std::map<std::string, VideoPrediction> load_predictions(const std::string& path) {
  std::map<std::string, VideoPrediction> out;
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    require(j.at("version").get<int>() == 1, ErrorKind::unsupported_version, "prediction file version");
    for (const auto& p : j.at("predictions")) {
      VideoPrediction vp;
      vp.video_id = p.at("video_id").get<std::string>();
      const auto seg = p.at("segment").get<std::vector<int>>();
      require(seg.size() == 2, ErrorKind::malformed_syntax, "segment must be [start, end]");
      vp.segment = {seg[0], seg[1]};
      validate(vp.segment);
      for (const auto& t : p.at("tubes")) vp.tubes.push_back(tube_from_json(t));
      const std::string id = vp.video_id;
      require(out.emplace(id, std::move(vp)).second, ErrorKind::invariant_violation, "duplicate prediction for " + id);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::malformed_syntax, "prediction file " + path + ": " + e.what());
  }
  return out;
}

/// Raw network outputs for one video.
struct RawOutput {
  std::string video_id;
  Tensor boxes;           // [N_v x N_q x 4]
  Tensor class_probs;     // [N_v x N_q x S]
  Tensor temporal_probs;  // [N_v x 2]
  Segment segment;
};

inline RawOutput raw_output(std::string video_id, const PredictionSet& p) {
  return {std::move(video_id), p.spatial.boxes, p.spatial.class_probs, p.temporal.probs, p.temporal.segment};
}

inline nlohmann::json to_json(const RawOutput& r) {
  return {{"video_id", r.video_id},
          {"frames", r.boxes.extent(0)},
          {"queries", r.boxes.extent(1)},
          {"slots", r.class_probs.extent(2)},
          {"segment", {r.segment.start, r.segment.end}},
          {"boxes", r.boxes.data()},
          {"class_probs", r.class_probs.data()},
          {"temporal_probs", r.temporal_probs.data()}};
}

inline RawOutput raw_output_from_json(const nlohmann::json& j) {
  RawOutput r;
  r.video_id = j.at("video_id").get<std::string>();
  const auto nv = j.at("frames").get<std::size_t>(), nq = j.at("queries").get<std::size_t>(),
             s = j.at("slots").get<std::size_t>();
  auto fill = [&](const char* key, Shape shape) {
    Tensor t(std::move(shape));
    const auto v = j.at(key).get<std::vector<double>>();
    require(v.size() == t.size(), ErrorKind::shape_mismatch, std::string(key) + " has the wrong length");
    std::copy(v.begin(), v.end(), t.data().begin());
    return t;
  };
  r.boxes = fill("boxes", {nv, nq, 4});
  r.class_probs = fill("class_probs", {nv, nq, s});
  r.temporal_probs = fill("temporal_probs", {nv, 2});
  const auto seg = j.at("segment").get<std::vector<int>>();
  require(seg.size() == 2, ErrorKind::malformed_syntax, "segment must be [start, end]");
  r.segment = {seg[0], seg[1]};
  return r;
}

inline nlohmann::json raw_outputs_to_json(const std::vector<RawOutput>& xs, std::uint64_t seed) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = seed;
  auto& vs = j["videos"] = nlohmann::json::array();
  for (const auto& x : xs) vs.push_back(to_json(x));
  return j;
}

inline std::vector<RawOutput> load_raw_outputs(const std::string& path) {
  std::vector<RawOutput> out;
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    require(j.at("version").get<int>() == 1, ErrorKind::unsupported_version, "raw output file version");
    for (const auto& v : j.at("videos")) out.push_back(raw_output_from_json(v));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::malformed_syntax, "raw output file " + path + ": " + e.what());
  }
  return out;
}

}  // namespace omnitube
