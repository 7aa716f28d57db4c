#pragma once

// Annotation records: query text, object mentions with token spans, the
// shared temporal segment and one box track per target. Stored as JSON; the
// schema is documented in docs/formats.md.

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "omnitube/error.hpp"
#include "omnitube/geometry.hpp"
#include "omnitube/ground_truth.hpp"
#include "omnitube/tube_builder.hpp"

namespace omnitube {

inline constexpr std::size_t kMinTargets = 1;
inline constexpr std::size_t kMaxTargets = 10;

/// Lowercased tokens split at whitespace; each punctuation character is its
/// own token.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

struct AnnotatedTarget {
  std::size_t mention = 0;
  std::map<int, Box> track;  // frame -> box
  friend bool operator==(const AnnotatedTarget&, const AnnotatedTarget&) = default;
};

struct AnnotationRecord {
  std::string video_id;
  int frames = 0;
  double fps = 2.0;
  std::string query;
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;
  Segment segment;
  std::vector<AnnotatedTarget> targets;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Violation classes reported by the validator; each has a stable name.
enum class IssueKind {
  syntax,
  missing_field,
  frame_count,
  target_count,
  segment_range,
  token_mismatch,
  mention_span,
  mention_reference,
  mention_count,
  track_gap,
  track_extra_frame,
  duplicate_frame,
  box_range,
  unreadable,
  feature_mismatch,
};

inline std::string_view to_string(IssueKind k) {
  switch (k) {
    case IssueKind::syntax: return "syntax";
    case IssueKind::missing_field: return "missing field";
    case IssueKind::frame_count: return "frame count";
    case IssueKind::target_count: return "target count";
    case IssueKind::segment_range: return "segment range";
    case IssueKind::token_mismatch: return "token mismatch";
    case IssueKind::mention_span: return "mention span";
    case IssueKind::mention_reference: return "mention reference";
    case IssueKind::mention_count: return "mention count";
    case IssueKind::track_gap: return "track gap";
    case IssueKind::track_extra_frame: return "track extra frame";
    case IssueKind::duplicate_frame: return "duplicate frame";
    case IssueKind::box_range: return "box range";
    case IssueKind::unreadable: return "unreadable";
    case IssueKind::feature_mismatch: return "feature mismatch";
  }
  return "unknown";
}

struct Issue {
  IssueKind kind;
  std::string path;  // JSON-pointer-like field path
  std::string message;
};

class AnnotationError : public Error {
 public:
  explicit AnnotationError(std::vector<Issue> issues)
      : Error(issues.front().kind == IssueKind::syntax ? ErrorKind::malformed_syntax : ErrorKind::invariant_violation,
              describe(issues)),
        issues_(std::move(issues)) {}

  const std::vector<Issue>& issues() const { return issues_; }
  IssueKind first_kind() const { return issues_.front().kind; }

 private:
  static std::string describe(const std::vector<Issue>& issues) {
    std::string s;
    for (const auto& i : issues)
      s += (s.empty() ? "" : "; ") + i.path + ": " + std::string(to_string(i.kind)) + " (" + i.message + ")";
    return s;
  }
  std::vector<Issue> issues_;
};

/// Checks every record invariant and returns all violations.
inline std::vector<Issue> check_record(const AnnotationRecord& r) {
  std::vector<Issue> issues;
  auto flag = [&](IssueKind k, std::string path, std::string msg) {
    issues.push_back({k, std::move(path), std::move(msg)});
  };

  if (r.frames < 1) flag(IssueKind::frame_count, "/frames", "video needs at least one frame");
  if (r.segment.start < 0 || r.segment.end < r.segment.start || r.segment.end >= r.frames)
    flag(IssueKind::segment_range, "/segment",
         "[" + std::to_string(r.segment.start) + "," + std::to_string(r.segment.end) + "] outside [0," +
             std::to_string(r.frames - 1) + "]");
  if (r.targets.size() < kMinTargets || r.targets.size() > kMaxTargets)
    flag(IssueKind::target_count, "/targets", std::to_string(r.targets.size()) + " targets, expected 1 to 10");
  if (r.tokens != tokenize(r.query)) flag(IssueKind::token_mismatch, "/tokens", "tokens differ from tokenized query");

  for (std::size_t i = 0; i < r.mentions.size(); ++i) {
    const auto& m = r.mentions[i];
    if (m.span_begin > m.span_end || m.span_end >= r.tokens.size())
      flag(IssueKind::mention_span, "/mentions/" + std::to_string(i) + "/span", "span outside token range");
  }
  std::vector<std::size_t> refs(r.mentions.size(), 0);
  for (std::size_t t = 0; t < r.targets.size(); ++t) {
    const auto& tg = r.targets[t];
    const std::string base = "/targets/" + std::to_string(t);
    if (tg.mention >= r.mentions.size())
      flag(IssueKind::mention_reference, base + "/mention", "no mention " + std::to_string(tg.mention));
    else
      ++refs[tg.mention];
    for (int f = r.segment.start; f <= r.segment.end && r.segment.end >= r.segment.start; ++f)
      if (!tg.track.contains(f)) {
        flag(IssueKind::track_gap, base + "/track", "missing frame " + std::to_string(f));
        break;
      }
    for (const auto& [f, b] : tg.track) {
      if (!r.segment.contains(f))
        flag(IssueKind::track_extra_frame, base + "/track", "frame " + std::to_string(f) + " outside segment");
      const bool finite = std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) && std::isfinite(b.h);
      constexpr double slack = 1e-9;
      if (!finite || b.w < 0 || b.h < 0 || b.cx - 0.5 * b.w < -slack || b.cy - 0.5 * b.h < -slack ||
          b.cx + 0.5 * b.w > 1 + slack || b.cy + 0.5 * b.h > 1 + slack)
        flag(IssueKind::box_range, base + "/track", "box at frame " + std::to_string(f) + " leaves [0,1]");
    }
  }
  for (std::size_t i = 0; i < r.mentions.size(); ++i)
    if (refs[i] != r.mentions[i].count)
      flag(
          IssueKind::mention_count, "/mentions/" + std::to_string(i) + "/count",
          "declares " + std::to_string(r.mentions[i].count) + " targets, " + std::to_string(refs[i]) + " reference it");
  return issues;
}

namespace detail {

struct JsonReader {
  std::vector<Issue>& issues;

  const nlohmann::json* field(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) {
      issues.push_back({IssueKind::missing_field, path + "/" + key, "required"});
      return nullptr;
    }
    return &obj.at(key);
  }

  template <typename T>
  bool get(const nlohmann::json& obj, const std::string& key, const std::string& path, T& out) {
    const auto* v = field(obj, key, path);
    if (!v) return false;
    try {
      out = v->get<T>();
      return true;
    } catch (const nlohmann::json::exception&) {
      issues.push_back({IssueKind::missing_field, path + "/" + key, "wrong type"});
      return false;
    }
  }
};

inline Box box_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw nlohmann::json::type_error::create(302, "box needs 4 numbers", nullptr);
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace detail

inline AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  std::vector<Issue> issues;
  detail::JsonReader rd{issues};
  AnnotationRecord r;
  int version = 0;
  if (rd.get(j, "version", "", version) && version != 1)
    issues.push_back({IssueKind::syntax, "/version", "unsupported version " + std::to_string(version)});
  rd.get(j, "video_id", "", r.video_id);
  rd.get(j, "frames", "", r.frames);
  if (j.is_object() && j.contains("fps")) rd.get(j, "fps", "", r.fps);
  rd.get(j, "query", "", r.query);
  r.tokens = tokenize(r.query);
  if (j.is_object() && j.contains("tokens")) rd.get(j, "tokens", "", r.tokens);

  std::vector<int> seg;
  if (rd.get(j, "segment", "", seg)) {
    if (seg.size() == 2)
      r.segment = {seg[0], seg[1]};
    else
      issues.push_back({IssueKind::missing_field, "/segment", "expected [start, end]"});
  }

  if (const auto* ms = rd.field(j, "mentions", ""); ms && ms->is_array()) {
    for (std::size_t i = 0; i < ms->size(); ++i) {
      const std::string path = "/mentions/" + std::to_string(i);
      Mention m;
      std::vector<std::size_t> span;
      rd.get((*ms)[i], "word", path, m.word);
      if (rd.get((*ms)[i], "span", path, span)) {
        if (span.size() == 2) {
          m.span_begin = span[0];
          m.span_end = span[1];
        } else {
          issues.push_back({IssueKind::missing_field, path + "/span", "expected [begin, end]"});
        }
      }
      rd.get((*ms)[i], "count", path, m.count);
      r.mentions.push_back(m);
    }
  }

  if (const auto* ts = rd.field(j, "targets", ""); ts && ts->is_array()) {
    for (std::size_t t = 0; t < ts->size(); ++t) {
      const std::string path = "/targets/" + std::to_string(t);
      AnnotatedTarget tg;
      rd.get((*ts)[t], "mention", path, tg.mention);
      if (const auto* track = rd.field((*ts)[t], "track", path); track && track->is_array()) {
        for (std::size_t k = 0; k < track->size(); ++k) {
          const std::string kp = path + "/track/" + std::to_string(k);
          int frame = 0;
          if (!rd.get((*track)[k], "frame", kp, frame)) continue;
          const auto* b = rd.field((*track)[k], "box", kp);
          if (!b) continue;
          try {
            if (!tg.track.emplace(frame, detail::box_from_json(*b)).second)
              issues.push_back({IssueKind::duplicate_frame, kp, "frame " + std::to_string(frame) + " repeated"});
          } catch (const nlohmann::json::exception&) {
            issues.push_back({IssueKind::missing_field, kp + "/box", "expected [cx, cy, w, h]"});
          }
        }
      }
      r.targets.push_back(std::move(tg));
    }
  }

  if (issues.empty()) issues = check_record(r);
  if (!issues.empty()) throw AnnotationError(std::move(issues));
  return r;
}

inline AnnotationRecord parse_annotation(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw AnnotationError({{IssueKind::syntax, "", e.what()}});
  }
  return annotation_from_json(j);
}

inline nlohmann::json to_json(const AnnotationRecord& r) {
  nlohmann::json j;
  j["version"] = 1;
  j["video_id"] = r.video_id;
  j["frames"] = r.frames;
  j["fps"] = r.fps;
  j["query"] = r.query;
  j["tokens"] = r.tokens;
  j["segment"] = {r.segment.start, r.segment.end};
  auto& ms = j["mentions"] = nlohmann::json::array();
  for (const auto& m : r.mentions)
    ms.push_back({{"word", m.word}, {"span", {m.span_begin, m.span_end}}, {"count", m.count}});
  auto& ts = j["targets"] = nlohmann::json::array();
  for (const auto& t : r.targets) {
    nlohmann::json track = nlohmann::json::array();
    for (const auto& [f, b] : t.track) track.push_back({{"frame", f}, {"box", {b.cx, b.cy, b.w, b.h}}});
    ts.push_back({{"mention", t.mention}, {"track", std::move(track)}});
  }
  return j;
}

inline AnnotationRecord load_annotation(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_annotation(ss.str());
}

/// Training view: one TargetTrack per annotated target.
inline GroundTruth ground_truth(const AnnotationRecord& r) {
  GroundTruth gt{r.segment, {}};
  for (const auto& t : r.targets) {
    TargetTrack tt{r.mentions.at(t.mention).slot(), {}};
    for (int f = r.segment.start; f <= r.segment.end; ++f) tt.boxes.push_back(t.track.at(f));
    gt.targets.push_back(std::move(tt));
  }
  return gt;
}

/// Evaluation view: one Tube per annotated target.
inline std::vector<Tube> ground_truth_tubes(const AnnotationRecord& r) {
  std::vector<Tube> tubes;
  for (const auto& t : r.targets) {
    const auto& m = r.mentions.at(t.mention);
    Tube tube{m.word, m.span_begin, m.span_end, m.slot(), r.segment, {}};
    for (int f = r.segment.start; f <= r.segment.end; ++f) tube.boxes.push_back(t.track.at(f));
    tubes.push_back(std::move(tube));
  }
  return tubes;
}

}  // namespace omnitube
