#pragma once

// Synthetic samples with a known answer. Each target owns grid cells whose
// appearance and motion features point along the text direction (scaled by
// 1 + margin); every other cell carries noise orthogonal to that direction.
// Text tokens are the direction plus zero-sum orthogonal noise, so their mean
// is exactly the direction. Boxes drift slowly inside the target's own cell,
// which keeps different targets disjoint on every frame.

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "omnitube/annotation.hpp"
#include "omnitube/features.hpp"
#include "omnitube/random.hpp"

namespace omnitube {

struct SynthConfig {
  std::uint64_t seed = 0;
  std::string video_id = "synth";
  std::uint32_t frames = 8;
  std::uint32_t grid_h = 4;
  std::uint32_t grid_w = 4;
  std::uint32_t appearance_dim = 32;
  std::uint32_t motion_dim = 32;
  std::uint32_t text_dim = 32;
  std::size_t targets = 0;  // 0 draws uniformly from [1, max_targets]
  std::size_t max_targets = kMaxTargets;
  std::size_t cells_per_target = 1;
  double margin = 0.5;       // planted cells are (1 + margin) * direction + noise
  double cell_noise = 0.1;   // orthogonal noise on planted cells
  double background = 1.0;   // norm scale of background cells
  double text_noise = 0.5;
  double fps = 2.0;
  std::size_t max_text = 30;
};

struct SynthSample {
  AnnotationRecord record;
  FeatureBundle features;
  std::vector<std::size_t> planted;  // all planted cells, target-major
};

namespace synth_detail {

struct ClassWord {
  const char* singular;
  const char* plural;
};

inline constexpr std::array<ClassWord, 20> kClasses{{
    {"person", "people"}, {"man", "men"},       {"woman", "women"},       {"child", "children"},
    {"dog", "dogs"},      {"cat", "cats"},       {"horse", "horses"},      {"zebra", "zebras"},
    {"elephant", "elephants"}, {"giraffe", "giraffes"}, {"bird", "birds"}, {"car", "cars"},
    {"bus", "buses"},     {"bicycle", "bicycles"}, {"boat", "boats"},      {"cow", "cows"},
    {"sheep", "sheep"},   {"bear", "bears"},     {"monkey", "monkeys"},    {"duck", "ducks"},
}};

inline constexpr std::array<const char*, 10> kNumbers{"one", "two", "three", "four", "five",
                                                      "six", "seven", "eight", "nine", "ten"};

inline constexpr std::array<const char*, 5> kActions{"move around", "walk together", "stay close",
                                                     "cross the scene", "play nearby"};

inline std::vector<double> normalized(std::vector<double> v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

inline std::vector<double> orthogonal_noise(Rng& rng, const std::vector<double>& dir, double scale) {
  std::vector<double> v(dir.size());
  const double s = scale / std::sqrt(static_cast<double>(dir.size()));
  for (double& x : v) x = s * rng.normal();
  double dot = 0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * dir[i];
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * dir[i];
  return v;
}

inline void plant_grid(Rng& rng, std::vector<float>& out, std::size_t frames, std::size_t cells,
                       const std::vector<double>& dir, const std::vector<bool>& planted, const SynthConfig& cfg) {
  const std::size_t d = dir.size();
  out.assign(frames * cells * d, 0.0f);
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t c = 0; c < cells; ++c) {
      float* dst = out.data() + (f * cells + c) * d;
      if (planted[c]) {
        const auto n = orthogonal_noise(rng, dir, cfg.cell_noise);
        for (std::size_t i = 0; i < d; ++i) dst[i] = static_cast<float>((1 + cfg.margin) * dir[i] + n[i]);
      } else {
        const auto n = orthogonal_noise(rng, dir, cfg.background);
        for (std::size_t i = 0; i < d; ++i) dst[i] = static_cast<float>(n[i]);
      }
    }
}

}  // namespace synth_detail

inline SynthSample synthesize(const SynthConfig& cfg) {
  using namespace synth_detail;
  require(cfg.frames >= 1 && cfg.grid_h >= 1 && cfg.grid_w >= 1, ErrorKind::invalid_argument, "empty synthetic grid");
  require(cfg.cells_per_target >= 1, ErrorKind::invalid_argument, "cells_per_target must be positive");
  const std::size_t cells = std::size_t{cfg.grid_h} * cfg.grid_w;
  const std::size_t cap = std::min(kMaxTargets, std::min(cfg.max_targets, cells / cfg.cells_per_target));
  require(cap >= 1, ErrorKind::invalid_argument, "grid too small for one target");
  Rng rng(cfg.seed);
  const std::size_t targets =
      cfg.targets ? cfg.targets : static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(cap)));
  require(targets >= kMinTargets && targets <= kMaxTargets, ErrorKind::invalid_argument,
          "synthetic target count must be in [1, 10]");
  require(targets * cfg.cells_per_target <= cells, ErrorKind::invalid_argument,
          "not enough grid cells for the requested targets");

  // query: up to three distinct classes sharing the targets
  const std::size_t kinds =
      static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(std::min<std::size_t>(3, targets))));
  std::vector<std::size_t> order(kClasses.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < kinds; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
  std::vector<std::size_t> counts(kinds, 1);
  for (std::size_t extra = targets - kinds; extra > 0; --extra) ++counts[rng.index(kinds)];

  SynthSample s;
  auto& rec = s.record;
  rec.video_id = cfg.video_id;
  rec.frames = static_cast<int>(cfg.frames);
  rec.fps = cfg.fps;
  std::string query;
  std::size_t token = 0;
  for (std::size_t k = 0; k < kinds; ++k) {
    const auto& cls = kClasses[order[k]];
    if (k) {
      query += " and ";
      ++token;
    }
    query += std::string(kNumbers[counts[k] - 1]) + " " + (counts[k] > 1 ? cls.plural : cls.singular);
    rec.mentions.push_back({cls.singular, token, token + 1, counts[k]});
    token += 2;
  }
  query += std::string(" ") + kActions[rng.index(kActions.size())];
  rec.query = query;
  rec.tokens = tokenize(query);
  require(rec.tokens.size() <= cfg.max_text, ErrorKind::invalid_argument, "synthetic query exceeds max_text");

  rec.segment.start = rng.uniform_int(0, rec.frames - 1);
  rec.segment.end = rng.uniform_int(rec.segment.start, rec.frames - 1);

  // distinct cells, target-major
  std::vector<std::size_t> grid(cells);
  std::iota(grid.begin(), grid.end(), 0);
  const std::size_t need = targets * cfg.cells_per_target;
  for (std::size_t i = 0; i < need; ++i) std::swap(grid[i], grid[i + rng.index(cells - i)]);
  s.planted.assign(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(need));

  const double cw = 1.0 / cfg.grid_w, ch = 1.0 / cfg.grid_h;
  std::size_t mention = 0, used = 0;
  for (std::size_t t = 0; t < targets; ++t) {
    while (used == rec.mentions[mention].count) {
      ++mention;
      used = 0;
    }
    ++used;
    const std::size_t cell = s.planted[t * cfg.cells_per_target];
    const double x0 = static_cast<double>(cell % cfg.grid_w) * cw, y0 = static_cast<double>(cell / cfg.grid_w) * ch;
    const double w = cw * rng.uniform(0.4, 0.6), h = ch * rng.uniform(0.4, 0.6);
    const double ax = 0.4 * (cw - w), ay = 0.4 * (ch - h);
    const double px = rng.uniform(0, 6.283185307179586), py = rng.uniform(0, 6.283185307179586);
    AnnotatedTarget tg{mention, {}};
    for (int f = rec.segment.start; f <= rec.segment.end; ++f)
      tg.track[f] = {x0 + 0.5 * cw + ax * std::sin(px + 0.3 * f), y0 + 0.5 * ch + ay * std::sin(py + 0.3 * f), w, h};
    rec.targets.push_back(std::move(tg));
  }

  // features
  const std::size_t dmax = std::max({cfg.appearance_dim, cfg.motion_dim, cfg.text_dim});
  std::vector<double> base(dmax);
  for (double& x : base) x = rng.normal();
  auto direction = [&](std::size_t d) {
    return normalized(std::vector<double>(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(d)));
  };
  const auto ua = direction(cfg.appearance_dim), um = direction(cfg.motion_dim), ut = direction(cfg.text_dim);
  std::vector<bool> is_planted(cells, false);
  for (auto c : s.planted) is_planted[c] = true;

  auto& fb = s.features;
  fb.frames = cfg.frames;
  fb.grid_h = cfg.grid_h;
  fb.grid_w = cfg.grid_w;
  fb.appearance_dim = cfg.appearance_dim;
  fb.motion_dim = cfg.motion_dim;
  fb.text_dim = cfg.text_dim;
  fb.text_tokens = static_cast<std::uint32_t>(rec.tokens.size());
  fb.seed = cfg.seed;
  plant_grid(rng, fb.appearance, cfg.frames, cells, ua, is_planted, cfg);
  plant_grid(rng, fb.motion, cfg.frames, cells, um, is_planted, cfg);

  const std::size_t nt = rec.tokens.size();
  std::vector<std::vector<double>> noise(nt);
  std::vector<double> mean(cfg.text_dim, 0.0);
  for (auto& n : noise) {
    n = orthogonal_noise(rng, ut, cfg.text_noise);
    for (std::size_t i = 0; i < n.size(); ++i) mean[i] += n[i] / static_cast<double>(nt);
  }
  fb.text.resize(nt * cfg.text_dim);
  for (std::size_t k = 0; k < nt; ++k)
    for (std::size_t i = 0; i < cfg.text_dim; ++i)
      fb.text[k * cfg.text_dim + i] = static_cast<float>(ut[i] + noise[k][i] - mean[i]);
  return s;
}

inline std::string synth_video_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%05zu", index);
  return buf;
}

}  // namespace omnitube
