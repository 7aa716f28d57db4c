#include <gtest/gtest.h>

#include <fstream>

#include "omnitube/annotation.hpp"
#include "oracles.hpp"

using namespace omnitube;
using nlohmann::json;

namespace {

json valid_record() {
  return json::parse(R"({
    "version": 1,
    "video_id": "clip_0001",
    "frames": 6,
    "fps": 2,
    "query": "The man feeds two ducks.",
    "segment": [1, 3],
    "mentions": [
      {"word": "man", "span": [0, 1], "count": 1},
      {"word": "duck", "span": [3, 4], "count": 2}
    ],
    "targets": [
      {"mention": 0, "track": [{"frame": 1, "box": [0.3, 0.5, 0.2, 0.6]},
                               {"frame": 2, "box": [0.3, 0.5, 0.2, 0.6]},
                               {"frame": 3, "box": [0.32, 0.5, 0.2, 0.6]}]},
      {"mention": 1, "track": [{"frame": 1, "box": [0.7, 0.8, 0.1, 0.1]},
                               {"frame": 2, "box": [0.72, 0.8, 0.1, 0.1]},
                               {"frame": 3, "box": [0.74, 0.8, 0.1, 0.1]}]},
      {"mention": 1, "track": [{"frame": 1, "box": [0.5, 0.8, 0.1, 0.1]},
                               {"frame": 2, "box": [0.5, 0.8, 0.1, 0.1]},
                               {"frame": 3, "box": [0.5, 0.8, 0.1, 0.1]}]}
    ]
  })");
}

// Parses and expects a failure whose issue list contains `kind`.
void expect_issue(const json& j, IssueKind kind) {
  try {
    annotation_from_json(j);
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const AnnotationError& e) {
    bool found = false;
    for (const auto& i : e.issues()) found |= i.kind == kind;
    EXPECT_TRUE(found) << "got: " << e.what();
    EXPECT_EQ(e.kind(), kind == IssueKind::syntax ? ErrorKind::malformed_syntax : ErrorKind::invariant_violation);
  }
}

json target_with(int mention, int first, int last) {
  json track = json::array();
  for (int f = first; f <= last; ++f) track.push_back({{"frame", f}, {"box", {0.5, 0.5, 0.1, 0.1}}});
  return {{"mention", mention}, {"track", track}};
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("The man feeds two ducks."),
            (std::vector<std::string>{"the", "man", "feeds", "two", "ducks", "."}));
  EXPECT_EQ(tokenize("  a,b  "), (std::vector<std::string>{"a", ",", "b"}));
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Annotation, ParsesValidRecord) {
  const AnnotationRecord r = annotation_from_json(valid_record());
  EXPECT_EQ(r.video_id, "clip_0001");
  EXPECT_EQ(r.tokens.size(), 6u);
  EXPECT_EQ(r.mentions[1].slot(), 4u);
  EXPECT_EQ(r.targets.size(), 3u);
  EXPECT_EQ(r.targets[1].track.at(2), (Box{0.72, 0.8, 0.1, 0.1}));
}

TEST(Annotation, RoundTripsThroughJson) {
  const AnnotationRecord r = annotation_from_json(valid_record());
  EXPECT_EQ(parse_annotation(to_json(r).dump()), r);
  EXPECT_EQ(to_json(parse_annotation(to_json(r).dump(2))), to_json(r));
}

TEST(Annotation, LoadsFromDisk) {
  const auto dir = oracle::scratch_dir("annotation_load");
  std::ofstream(dir / "a.json") << valid_record().dump();
  EXPECT_EQ(load_annotation((dir / "a.json").string()).video_id, "clip_0001");
  try {
    load_annotation((dir / "missing.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io_error);
  }
}

TEST(Annotation, GroundTruthViews) {
  const AnnotationRecord r = annotation_from_json(valid_record());
  const GroundTruth gt = ground_truth(r);
  EXPECT_EQ(gt.segment, (Segment{1, 3}));
  ASSERT_EQ(gt.targets.size(), 3u);
  EXPECT_EQ(gt.targets[0].slot, 1u);
  EXPECT_EQ(gt.targets[2].slot, 4u);
  EXPECT_EQ(gt.box(1, 3), (Box{0.74, 0.8, 0.1, 0.1}));
  const auto tubes = ground_truth_tubes(r);
  EXPECT_EQ(tubes[1].word, "duck");
  EXPECT_EQ(tubes[1].segment, (Segment{1, 3}));
  EXPECT_EQ(tubes[1].boxes.size(), 3u);
}

TEST(AnnotationIssues, Syntax) {
  try {
    parse_annotation("{\"version\": 1,");
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.first_kind(), IssueKind::syntax);
    EXPECT_EQ(e.kind(), ErrorKind::malformed_syntax);
  }
  json j = valid_record();
  j["version"] = 7;
  expect_issue(j, IssueKind::syntax);
}

TEST(AnnotationIssues, MissingField) {
  json j = valid_record();
  j.erase("segment");
  expect_issue(j, IssueKind::missing_field);
  j = valid_record();
  j["targets"][0]["track"][1]["box"] = {0.1, 0.2};
  expect_issue(j, IssueKind::missing_field);
  j = valid_record();
  j["frames"] = "six";
  expect_issue(j, IssueKind::missing_field);
}

TEST(AnnotationIssues, FrameCount) {
  json j = valid_record();
  j["frames"] = 0;
  expect_issue(j, IssueKind::frame_count);
}

TEST(AnnotationIssues, TargetCountBounds) {
  json j = valid_record();
  j["targets"] = json::array();
  j["mentions"][0]["count"] = 0;
  j["mentions"][1]["count"] = 0;
  expect_issue(j, IssueKind::target_count);

  j = valid_record();
  j["mentions"][1]["count"] = 10;
  for (int i = 0; i < 8; ++i) j["targets"].push_back(target_with(1, 1, 3));
  ASSERT_EQ(j["targets"].size(), 11u);
  expect_issue(j, IssueKind::target_count);

  // ten is allowed
  j["targets"].erase(10);
  j["mentions"][1]["count"] = 9;
  EXPECT_EQ(annotation_from_json(j).targets.size(), 10u);
}

TEST(AnnotationIssues, SegmentRange) {
  json j = valid_record();
  j["segment"] = {4, 6};
  expect_issue(j, IssueKind::segment_range);
  j["segment"] = {3, 1};
  expect_issue(j, IssueKind::segment_range);
}

TEST(AnnotationIssues, TokenMismatch) {
  json j = valid_record();
  j["tokens"] = {"the", "man"};
  expect_issue(j, IssueKind::token_mismatch);
}

TEST(AnnotationIssues, MentionSpan) {
  json j = valid_record();
  j["mentions"][1]["span"] = {3, 9};
  expect_issue(j, IssueKind::mention_span);
  j["mentions"][1]["span"] = {4, 3};
  expect_issue(j, IssueKind::mention_span);
}

TEST(AnnotationIssues, MentionReference) {
  json j = valid_record();
  j["targets"][0]["mention"] = 5;
  expect_issue(j, IssueKind::mention_reference);
}

TEST(AnnotationIssues, MentionCount) {
  json j = valid_record();
  j["mentions"][1]["count"] = 3;
  expect_issue(j, IssueKind::mention_count);
}

TEST(AnnotationIssues, TrackGap) {
  json j = valid_record();
  j["targets"][2]["track"].erase(1);
  expect_issue(j, IssueKind::track_gap);
}

TEST(AnnotationIssues, TrackExtraFrame) {
  json j = valid_record();
  j["targets"][0]["track"].push_back({{"frame", 5}, {"box", {0.5, 0.5, 0.1, 0.1}}});
  expect_issue(j, IssueKind::track_extra_frame);
}

TEST(AnnotationIssues, DuplicateFrame) {
  json j = valid_record();
  j["targets"][0]["track"].push_back({{"frame", 2}, {"box", {0.5, 0.5, 0.1, 0.1}}});
  expect_issue(j, IssueKind::duplicate_frame);
}

TEST(AnnotationIssues, BoxRange) {
  json j = valid_record();
  j["targets"][1]["track"][0]["box"] = {0.95, 0.5, 0.2, 0.2};
  expect_issue(j, IssueKind::box_range);
  j = valid_record();
  j["targets"][1]["track"][0]["box"] = {0.5, 0.5, -0.1, 0.2};
  expect_issue(j, IssueKind::box_range);
  // touching the border is fine
  j = valid_record();
  j["targets"][1]["track"][0]["box"] = {0.5, 0.5, 1.0, 1.0};
  EXPECT_NO_THROW(annotation_from_json(j));
}

TEST(AnnotationIssues, ReportsEveryViolation) {
  AnnotationRecord r = annotation_from_json(valid_record());
  r.frames = 3;
  r.mentions[0].count = 4;
  const auto issues = check_record(r);
  std::set<IssueKind> kinds;
  for (const auto& i : issues) kinds.insert(i.kind);
  EXPECT_TRUE(kinds.contains(IssueKind::segment_range));
  EXPECT_TRUE(kinds.contains(IssueKind::mention_count));
  EXPECT_EQ(to_string(IssueKind::feature_mismatch), "feature mismatch");
  EXPECT_EQ(to_string(IssueKind::unreadable), "unreadable");
}
