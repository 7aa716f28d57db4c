#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "omnitube/harness.hpp"
#include "oracles.hpp"

using namespace omnitube;
using namespace testing_helpers;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthRequest toy_request(const fs::path& dir, std::size_t count, std::uint64_t seed, std::size_t jobs = 1) {
  const ModelConfig c = toy_config();
  SynthRequest r;
  r.out_dir = dir.string();
  r.count = count;
  r.seed = seed;
  r.jobs = jobs;
  r.sample.frames = 6;
  r.sample.grid_h = static_cast<std::uint32_t>(c.grid_h);
  r.sample.grid_w = static_cast<std::uint32_t>(c.grid_w);
  r.sample.appearance_dim = static_cast<std::uint32_t>(c.appearance_dim);
  r.sample.motion_dim = static_cast<std::uint32_t>(c.motion_dim);
  r.sample.text_dim = static_cast<std::uint32_t>(c.text_dim);
  r.sample.max_text = c.max_text;
  return r;
}

std::vector<IssueKind> kinds(const RecordCheck& rc) {
  std::vector<IssueKind> out;
  for (const auto& i : rc.issues) out.push_back(i.kind);
  return out;
}

}  // namespace

TEST(ParallelMap, KeepsIndexOrder) {
  for (std::size_t jobs : {1, 3, 8}) {
    const auto out = parallel_map<std::size_t>(50, jobs, [](std::size_t i) { return i * i; });
    ASSERT_EQ(out.size(), 50u);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(out[i], i * i);
  }
  EXPECT_TRUE(parallel_map<int>(0, 4, [](std::size_t) { return 1; }).empty());
}

TEST(ParallelMap, RethrowsLowestIndexFailure) {
  try {
    parallel_map<int>(20, 4, [](std::size_t i) -> int {
      if (i == 7 || i == 13) throw Error(ErrorKind::invalid_argument, std::to_string(i));
      return 0;
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "invalid argument: 7");
  }
}

TEST(Harness, SynthIsDeterministicAcrossJobCounts) {
  const auto a = oracle::scratch_dir("synth_a"), b = oracle::scratch_dir("synth_b");
  const Manifest ma = run_synth(toy_request(a, 6, 5, 1));
  run_synth(toy_request(b, 6, 5, 4));
  for (const auto& e : ma.samples) {
    EXPECT_EQ(slurp(a / e.annotation), slurp(b / e.annotation));
    EXPECT_EQ(slurp(a / e.features), slurp(b / e.features));
  }
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  const Manifest back = load_manifest((a / "manifest.json").string());
  EXPECT_EQ(back.samples, ma.samples);
  EXPECT_EQ(back.seed, 5u);
}

TEST(Harness, SynthDatasetValidates) {
  const auto dir = oracle::scratch_dir("synth_validate");
  const Manifest m = run_synth(toy_request(dir, 8, 1));
  const auto r = validate_dataset(load_manifest((dir / "manifest.json").string()));
  EXPECT_EQ(r.records.size(), 8u);
  EXPECT_EQ(r.failures(), 0u);
}

TEST(Harness, ValidationReportsBrokenEntries) {
  const auto dir = oracle::scratch_dir("broken_validate");
  Manifest m = run_synth(toy_request(dir, 5, 2));
  // 0: manifest id disagrees with the annotation
  m.samples[0].video_id = "renamed";
  // 1: features from another video with a different frame count
  SynthConfig other = toy_request(dir, 1, 0).sample;
  other.frames = 9;
  other.seed = 99;
  write_features((dir / m.samples[1].features).string(), synthesize(other).features);
  // 2: features file missing
  fs::remove(dir / m.samples[2].features);
  // 3: annotation is not JSON
  std::ofstream(dir / m.samples[3].annotation) << "{ nope";
  // 4: annotation file missing
  fs::remove(dir / m.samples[4].annotation);
  write_manifest((dir / "manifest.json").string(), m);

  const auto r = validate_dataset(load_manifest((dir / "manifest.json").string()));
  ASSERT_EQ(r.records.size(), 5u);
  EXPECT_EQ(r.failures(), 5u);
  EXPECT_EQ(kinds(r.records[0]), std::vector<IssueKind>{IssueKind::feature_mismatch});
  const auto k1 = kinds(r.records[1]);
  ASSERT_FALSE(k1.empty());
  for (auto k : k1) EXPECT_EQ(k, IssueKind::feature_mismatch);
  EXPECT_EQ(kinds(r.records[2]), std::vector<IssueKind>{IssueKind::unreadable});
  EXPECT_EQ(kinds(r.records[3]), std::vector<IssueKind>{IssueKind::syntax});
  EXPECT_EQ(kinds(r.records[4]), std::vector<IssueKind>{IssueKind::unreadable});
}

TEST(Harness, ManifestErrors) {
  const auto dir = oracle::scratch_dir("manifest_errors");
  auto kind_of = [&](const std::string& text) {
    std::ofstream(dir / "m.json") << text;
    try {
      load_manifest((dir / "m.json").string());
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::empty_input;
  };
  EXPECT_EQ(kind_of(R"({"version": 2, "samples": []})"), ErrorKind::unsupported_version);
  EXPECT_EQ(kind_of(R"({"version": 1, "samples": [{"video_id": "x"}]})"), ErrorKind::malformed_syntax);
  EXPECT_EQ(kind_of("[1,"), ErrorKind::malformed_syntax);
  try {
    load_manifest((dir / "absent.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io_error);
  }
}

TEST(Harness, ForwardIsDeterministicAndLinkReproducesTubes) {
  const auto dir = oracle::scratch_dir("forward");
  const Manifest m = run_synth(toy_request(dir, 6, 3));
  const Model model = Model::initialized(toy_config(), 4);
  const ForwardResult one = run_forward(m, model, 4, 1), many = run_forward(m, model, 4, 4);
  EXPECT_EQ(raw_outputs_to_json(one.outputs, 4).dump(), raw_outputs_to_json(many.outputs, 4).dump());
  EXPECT_EQ(predictions_to_json(one.predictions, 4).dump(), predictions_to_json(many.predictions, 4).dump());
  ASSERT_EQ(one.outputs.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(one.outputs[i].video_id, m.samples[i].video_id);

  // raw outputs survive a JSON round trip and relink to the same tubes
  write_file((dir / "raw.json").string(), raw_outputs_to_json(one.outputs, 4).dump());
  const auto relinked = run_link(m, load_raw_outputs((dir / "raw.json").string()), 2);
  ASSERT_EQ(relinked.size(), one.predictions.size());
  for (std::size_t i = 0; i < relinked.size(); ++i) EXPECT_EQ(relinked[i], one.predictions[i]);

  // tubes only carry mentioned words and stay inside the predicted segment
  const auto records = load_records(m);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& p = one.predictions[i];
    EXPECT_LE(p.tubes.size(), toy_config().num_queries);
    for (const auto& t : p.tubes) {
      const bool named = std::any_of(records[i].mentions.begin(), records[i].mentions.end(),
                                     [&](const Mention& mention) { return mention.word == t.word; });
      EXPECT_TRUE(named) << t.word;
      EXPECT_GE(t.segment.start, p.segment.start);
      EXPECT_LE(t.segment.end, p.segment.end);
    }
  }
}

TEST(Harness, ForwardRejectsMismatchedFeatures) {
  const auto dir = oracle::scratch_dir("forward_mismatch");
  const Manifest m = run_synth(toy_request(dir, 2, 3));
  SynthConfig other = toy_request(dir, 1, 0).sample;
  other.frames = 3;
  write_features((dir / m.samples[1].features).string(), synthesize(other).features);
  EXPECT_THROW(run_forward(m, Model::initialized(toy_config(), 1), 1), Error);
}

TEST(Harness, LinkRejectsUnknownVideo) {
  const auto dir = oracle::scratch_dir("link_unknown");
  const Manifest m = run_synth(toy_request(dir, 1, 3));
  RawOutput r = run_forward(m, Model::initialized(toy_config(), 1), 1).outputs[0];
  r.video_id = "elsewhere";
  EXPECT_THROW(run_link(m, {r}), Error);
}

TEST(Harness, OraclePredictionsScorePerfectly) {
  const auto dir = oracle::scratch_dir("eval_oracle");
  const Manifest m = run_synth(toy_request(dir, 7, 6));
  std::map<std::string, VideoPrediction> preds;
  for (auto& p : oracle_predictions(m)) preds.emplace(p.video_id, p);
  const auto out = run_eval(m, preds, {0.3, 0.5}, true, 3);
  EXPECT_TRUE(out.warnings.empty());
  EXPECT_EQ(out.report.full.count, 7u);
  EXPECT_DOUBLE_EQ(out.report.full.m_tiou, 1.0);
  EXPECT_DOUBLE_EQ(out.report.full.m_viou, 1.0);
  EXPECT_EQ(out.report.full.viou_at, (std::vector<double>{1.0, 1.0}));
}

TEST(Harness, MissingPredictionScoresZeroOrFailsWhenStrict) {
  const auto dir = oracle::scratch_dir("eval_missing");
  const Manifest m = run_synth(toy_request(dir, 4, 7));
  std::map<std::string, VideoPrediction> preds;
  for (auto& p : oracle_predictions(m)) preds.emplace(p.video_id, p);
  const std::string dropped = m.samples[2].video_id;
  preds.erase(dropped);
  preds.emplace("stranger", VideoPrediction{"stranger", {0, 0}, {}});

  const auto out = run_eval(m, preds, {0.5});
  ASSERT_EQ(out.warnings.size(), 2u);
  EXPECT_NE(out.warnings[0].find(dropped), std::string::npos);
  EXPECT_NE(out.warnings[1].find("stranger"), std::string::npos);
  EXPECT_DOUBLE_EQ(out.report.full.m_tiou, 0.75);
  EXPECT_DOUBLE_EQ(out.report.full.m_viou, 0.75);
  for (const auto& s : out.report.samples) {
    if (s.video_id == dropped) {
      EXPECT_EQ(s.viou, 0.0);
    }
  }
  try {
    run_eval(m, preds, {0.5}, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invariant_violation);
  }
}

TEST(Harness, StatsMatchHandCounts) {
  const auto dir = oracle::scratch_dir("stats");
  const Manifest m = run_synth(toy_request(dir, 9, 8));
  const auto records = load_records(m);
  const DatasetStats s = compute_stats(records);
  EXPECT_EQ(s.videos, 9u);
  EXPECT_DOUBLE_EQ(s.mean_frames, 6.0);
  std::size_t targets = 0, boxes = 0, hist = 0, subsets = 0;
  double seg = 0;
  for (const auto& r : records) {
    targets += r.targets.size();
    seg += r.segment.end - r.segment.start + 1;
    for (const auto& t : r.targets) boxes += t.track.size();
  }
  EXPECT_NEAR(s.mean_targets, static_cast<double>(targets) / 9, 1e-12);
  EXPECT_NEAR(s.mean_boxes, static_cast<double>(boxes) / 9, 1e-12);
  EXPECT_NEAR(s.mean_segment, seg / 9, 1e-12);
  for (auto h : s.target_histogram) hist += h;
  for (const auto& [k, n] : s.subsets) subsets += n;
  EXPECT_EQ(hist, 9u);
  EXPECT_EQ(subsets, 9u);
  const auto j = to_json(s);
  EXPECT_EQ(j["videos"], 9);
  EXPECT_EQ(j["targets_histogram"].size(), kMaxTargets);
  EXPECT_EQ(compute_stats({}).videos, 0u);
}

TEST(Harness, CheckpointOrFreshModel) {
  const auto dir = oracle::scratch_dir("load_model");
  const ModelConfig c = toy_config();
  write_checkpoint((dir / "m.otc").string(), init_checkpoint(c, 21));
  const auto [from_disk, seed] = load_model(c, (dir / "m.otc").string(), 0);
  EXPECT_EQ(seed, 21u);
  const auto [fresh, fresh_seed] = load_model(c, "", 21);
  EXPECT_EQ(fresh_seed, 21u);
  Rng rng(1);
  const FeatureBundle b = random_bundle(rng, 3, 4, 4, 24, 20, 5, 16);
  EXPECT_EQ(from_disk.forward(b).spatial.boxes, fresh.forward(b).spatial.boxes);
}
