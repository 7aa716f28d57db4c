#pragma once

// Dataset manifests, whole-dataset validation and summary statistics.
//
// Manifest JSON: {"version": 1, "seed": S, "samples": [{"video_id": ...,
// "annotation": "annotations/x.json", "features": "features/x.otf"}]}.
// Paths are relative to the manifest's directory.

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "omnitube/annotation.hpp"
#include "omnitube/feature_io.hpp"
#include "omnitube/metrics.hpp"

namespace omnitube {

struct ManifestEntry {
  std::string video_id;
  std::string annotation;
  std::string features;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> samples;
  std::filesystem::path root;  // directory holding the manifest

  std::string annotation_path(const ManifestEntry& e) const { return (root / e.annotation).string(); }
  std::string features_path(const ManifestEntry& e) const { return (root / e.features).string(); }
};

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = m.seed;
  auto& xs = j["samples"] = nlohmann::json::array();
  for (const auto& e : m.samples)
    xs.push_back({{"video_id", e.video_id}, {"annotation", e.annotation}, {"features", e.features}});
  return j;
}

inline Manifest load_manifest(const std::string& path) {
  const std::string text = read_file(path);
  Manifest m;
  m.root = std::filesystem::path(path).parent_path();
  try {
    const auto j = nlohmann::json::parse(text);
    require(j.at("version").get<int>() == 1, ErrorKind::unsupported_version, "manifest version");
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& e : j.at("samples"))
      m.samples.push_back({e.at("video_id").get<std::string>(), e.at("annotation").get<std::string>(),
                           e.at("features").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::malformed_syntax, "manifest " + path + ": " + e.what());
  }
  return m;
}

inline void write_manifest(const std::string& path, const Manifest& m) {
  write_file(path, to_json(m).dump(2) + "\n");
}

struct RecordCheck {
  std::string video_id;
  std::vector<Issue> issues;
  bool ok() const { return issues.empty(); }
};

struct ValidationReport {
  std::vector<RecordCheck> records;
  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& r : records) n += !r.ok();
    return n;
  }
};

/// Annotation invariants plus agreement between the annotation and the
/// feature header (frame count, text length).
inline RecordCheck check_entry(const Manifest& m, const ManifestEntry& e) {
  RecordCheck rc{e.video_id, {}};
  AnnotationRecord rec;
  try {
    rec = load_annotation(m.annotation_path(e));
  } catch (const AnnotationError& err) {
    rc.issues = err.issues();
    return rc;
  } catch (const Error& err) {
    rc.issues.push_back({IssueKind::unreadable, e.annotation, err.what()});
    return rc;
  }
  if (rec.video_id != e.video_id)
    rc.issues.push_back({IssueKind::feature_mismatch, "/video_id", "manifest says " + e.video_id});
  try {
    const FeatureBundle head = read_feature_header(m.features_path(e));
    if (static_cast<int>(head.frames) != rec.frames)
      rc.issues.push_back({IssueKind::feature_mismatch, e.features,
                           "features have " + std::to_string(head.frames) + " frames, annotation " +
                               std::to_string(rec.frames)});
    if (head.text_tokens != rec.tokens.size())
      rc.issues.push_back({IssueKind::feature_mismatch, e.features,
                           "features have " + std::to_string(head.text_tokens) + " text tokens, query has " +
                               std::to_string(rec.tokens.size())});
  } catch (const Error& err) {
    rc.issues.push_back({IssueKind::unreadable, e.features, err.what()});
  }
  return rc;
}

inline ValidationReport validate_dataset(const Manifest& m) {
  ValidationReport r;
  for (const auto& e : m.samples) r.records.push_back(check_entry(m, e));
  return r;
}

struct DatasetStats {
  std::size_t videos = 0;
  double mean_frames = 0;
  double mean_segment = 0;
  double mean_targets = 0;
  double mean_boxes = 0;  // annotated boxes per video
  std::array<std::size_t, kMaxTargets + 1> target_histogram{};  // index = target count
  std::map<Subset, std::size_t> subsets;
};

inline DatasetStats compute_stats(const std::vector<AnnotationRecord>& records) {
  DatasetStats s;
  s.videos = records.size();
  for (const auto& r : records) {
    s.mean_frames += r.frames;
    s.mean_segment += r.segment.length();
    s.mean_targets += static_cast<double>(r.targets.size());
    for (const auto& t : r.targets) s.mean_boxes += static_cast<double>(t.track.size());
    ++s.target_histogram.at(r.targets.size());
    ++s.subsets[subset_of(r.targets.size())];
  }
  if (s.videos) {
    const double n = static_cast<double>(s.videos);
    s.mean_frames /= n;
    s.mean_segment /= n;
    s.mean_targets /= n;
    s.mean_boxes /= n;
  }
  return s;
}

inline nlohmann::json to_json(const DatasetStats& s) {
  nlohmann::json j;
  j["videos"] = s.videos;
  j["mean_frames"] = s.mean_frames;
  j["mean_segment_frames"] = s.mean_segment;
  j["mean_targets"] = s.mean_targets;
  j["mean_boxes"] = s.mean_boxes;
  auto& h = j["targets_histogram"] = nlohmann::json::object();
  for (std::size_t k = 1; k <= kMaxTargets; ++k) h[std::to_string(k)] = s.target_histogram[k];
  auto& sub = j["subsets"] = nlohmann::json::object();
  for (Subset k : {Subset::low, Subset::medium, Subset::high})
    sub[std::string(to_string(k))] = s.subsets.count(k) ? s.subsets.at(k) : 0;
  return j;
}

}  // namespace omnitube
