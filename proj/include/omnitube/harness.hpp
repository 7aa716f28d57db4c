#pragma once

// Command implementations behind the omnitube CLI. Each command works on
// files and returns plain data so tests can drive it without a process.

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "omnitube/annotation.hpp"
#include "omnitube/checkpoint.hpp"
#include "omnitube/dataset.hpp"
#include "omnitube/feature_io.hpp"
#include "omnitube/metrics.hpp"
#include "omnitube/model.hpp"
#include "omnitube/predictions.hpp"
#include "omnitube/synth.hpp"
#include "omnitube/tube_builder.hpp"

namespace omnitube {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results land at their
/// index, so output order never depends on scheduling. The first exception
/// (lowest index) is rethrown.
template <typename T>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// synth

struct SynthRequest {
  std::string out_dir;
  std::size_t count = 16;
  std::uint64_t seed = 0;
  SynthConfig sample;  // seed and video_id are set per sample
  std::size_t jobs = 1;
};

/// Writes annotations/<id>.json, features/<id>.otf and manifest.json.
inline Manifest run_synth(const SynthRequest& req) {
  namespace fs = std::filesystem;
  const fs::path root(req.out_dir);
  fs::create_directories(root / "annotations");
  fs::create_directories(root / "features");
  Manifest m;
  m.seed = req.seed;
  m.root = root;
  m.samples = parallel_map<ManifestEntry>(req.count, req.jobs, [&](std::size_t i) {
    SynthConfig cfg = req.sample;
    cfg.seed = mix_seed(req.seed, i);
    cfg.video_id = synth_video_id(i);
    const SynthSample s = synthesize(cfg);
    ManifestEntry e{cfg.video_id, "annotations/" + cfg.video_id + ".json", "features/" + cfg.video_id + ".otf"};
    write_file((root / e.annotation).string(), to_json(s.record).dump(2) + "\n");
    write_features((root / e.features).string(), s.features);
    return e;
  });
  write_manifest((root / "manifest.json").string(), m);
  return m;
}

// forward / link

/// Model from a checkpoint when `checkpoint` is non-empty, otherwise freshly
/// initialized from `seed`. Returns the seed recorded with the parameters.
inline std::pair<Model, std::uint64_t> load_model(const ModelConfig& cfg, const std::string& checkpoint,
                                                  std::uint64_t seed) {
  if (checkpoint.empty()) return {Model::initialized(cfg, seed), seed};
  Checkpoint ck = read_checkpoint(checkpoint);
  return {Model(cfg, ck.params), ck.seed};
}

inline Checkpoint init_checkpoint(const ModelConfig& cfg, std::uint64_t seed) {
  return {seed, init_params(seed, model_param_spec(cfg))};
}

/// Tubes for one video from its raw outputs and annotated mentions.
inline VideoPrediction link_video(const RawOutput& raw, const std::vector<Mention>& mentions) {
  return {raw.video_id, raw.segment, build_tubes(raw.boxes, raw.class_probs, raw.segment, mentions)};
}

struct ForwardResult {
  std::uint64_t seed = 0;
  std::vector<RawOutput> outputs;          // manifest order
  std::vector<VideoPrediction> predictions;  // manifest order
};

inline ForwardResult run_forward(const Manifest& m, const Model& model, std::uint64_t seed, std::size_t jobs = 1) {
  ForwardResult r;
  r.seed = seed;
  struct Item {
    RawOutput raw;
    VideoPrediction pred;
  };
  auto items = parallel_map<Item>(m.samples.size(), jobs, [&](std::size_t i) {
    const auto& e = m.samples[i];
    const AnnotationRecord rec = load_annotation(m.annotation_path(e));
    const FeatureBundle fb = read_features(m.features_path(e));
    require(static_cast<int>(fb.frames) == rec.frames && fb.text_tokens == rec.tokens.size(),
            ErrorKind::shape_mismatch, e.video_id + ": features disagree with annotation");
    RawOutput raw = raw_output(e.video_id, model.forward(fb));
    VideoPrediction pred = link_video(raw, rec.mentions);
    return Item{std::move(raw), std::move(pred)};
  });
  for (auto& it : items) {
    r.outputs.push_back(std::move(it.raw));
    r.predictions.push_back(std::move(it.pred));
  }
  return r;
}

/// Rebuilds tubes from saved raw outputs.
inline std::vector<VideoPrediction> run_link(const Manifest& m, const std::vector<RawOutput>& outputs,
                                             std::size_t jobs = 1) {
  std::map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : m.samples) by_id[e.video_id] = &e;
  return parallel_map<VideoPrediction>(outputs.size(), jobs, [&](std::size_t i) {
    const auto it = by_id.find(outputs[i].video_id);
    require(it != by_id.end(), ErrorKind::invalid_argument, outputs[i].video_id + " is not in the manifest");
    return link_video(outputs[i], load_annotation(m.annotation_path(*it->second)).mentions);
  });
}

// eval

inline SampleScore score_sample(const AnnotationRecord& rec, const VideoPrediction* pred) {
  SampleScore s{rec.video_id, 0.0, 0.0, rec.targets.size()};
  if (!pred) return s;
  s.tiou = sample_tiou(rec.segment, pred->segment);
  s.viou = sample_viou(rec.segment, ground_truth_tubes(rec), pred->segment, pred->tubes);
  return s;
}

struct EvalOutcome {
  EvalReport report;
  std::vector<std::string> warnings;
};

/// Scores every manifest sample. A video without a prediction scores zero
/// and produces a warning, or an error when `strict`.
inline EvalOutcome run_eval(const Manifest& m, const std::map<std::string, VideoPrediction>& preds,
                            std::vector<double> thresholds, bool strict = false, std::size_t jobs = 1) {
  EvalOutcome out;
  std::map<std::string, bool> seen;
  for (const auto& e : m.samples) {
    const bool has = preds.contains(e.video_id);
    seen[e.video_id] = true;
    if (!has) {
      require(!strict, ErrorKind::invariant_violation, "no prediction for " + e.video_id);
      out.warnings.push_back("no prediction for " + e.video_id + "; scored as zero");
    }
  }
  for (const auto& [id, p] : preds)
    if (!seen.contains(id)) out.warnings.push_back("prediction for unknown video " + id + " ignored");
  auto scores = parallel_map<SampleScore>(m.samples.size(), jobs, [&](std::size_t i) {
    const AnnotationRecord rec = load_annotation(m.annotation_path(m.samples[i]));
    const auto it = preds.find(rec.video_id);
    return score_sample(rec, it == preds.end() ? nullptr : &it->second);
  });
  out.report = aggregate(std::move(scores), std::move(thresholds));
  return out;
}

/// Ground-truth tubes as predictions; scores 1 on every metric.
inline std::vector<VideoPrediction> oracle_predictions(const Manifest& m) {
  std::vector<VideoPrediction> out;
  for (const auto& e : m.samples) {
    const auto rec = load_annotation(m.annotation_path(e));
    out.push_back({rec.video_id, rec.segment, ground_truth_tubes(rec)});
  }
  return out;
}

inline std::vector<AnnotationRecord> load_records(const Manifest& m) {
  std::vector<AnnotationRecord> out;
  for (const auto& e : m.samples) out.push_back(load_annotation(m.annotation_path(e)));
  return out;
}

}  // namespace omnitube
