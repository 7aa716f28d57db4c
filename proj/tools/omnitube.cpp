// omnitube command-line driver.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "omnitube/gradcheck.hpp"
#include "omnitube/harness.hpp"

namespace ot = omnitube;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kFailed = 1;  // violations, failed checks, bad input
constexpr int kIo = 2;      // unreadable or unwritable files

struct Globals {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  ot::ModelConfig model;
  std::string similarity = "cosine";
};

void add_model_options(CLI::App& app, Globals& g) {
  auto& m = g.model;
  app.add_option("--d-model", m.d_model, "hidden width")->capture_default_str();
  app.add_option("--heads", m.heads, "attention heads")->capture_default_str();
  app.add_option("--ffn-dim", m.ffn_dim, "feed-forward width (0 = 4 x d-model)")->capture_default_str();
  app.add_option("--grid-h", m.grid_h, "feature grid rows")->capture_default_str();
  app.add_option("--grid-w", m.grid_w, "feature grid columns")->capture_default_str();
  app.add_option("--appearance-dim", m.appearance_dim, "appearance feature width")->capture_default_str();
  app.add_option("--motion-dim", m.motion_dim, "motion feature width")->capture_default_str();
  app.add_option("--text-dim", m.text_dim, "text feature width")->capture_default_str();
  app.add_option("--max-text", m.max_text, "maximum query tokens")->capture_default_str();
  app.add_option("--max-frames", m.max_frames, "maximum frames per video")->capture_default_str();
  app.add_option("--queries", m.num_queries, "spatial queries per frame")->capture_default_str();
  app.add_option("--top-m", m.top_m, "cells averaged into each generated query")->capture_default_str();
  app.add_option("--encoder-layers", m.encoder_layers, "encoder blocks")->capture_default_str();
  app.add_option("--decoder-layers", m.decoder_layers, "decoder layers")->capture_default_str();
  app.add_option("--similarity", g.similarity, "query generation similarity")
      ->check(CLI::IsMember({"cosine", "dot"}))
      ->capture_default_str();
}

void write_json(const std::string& path, const nlohmann::json& j) { ot::write_file(path, j.dump(2) + "\n"); }

void print_issues(const ot::ValidationReport& r) {
  for (const auto& rec : r.records)
    for (const auto& i : rec.issues)
      std::printf("%s %s: %s (%s)\n", rec.video_id.c_str(), i.path.c_str(), std::string(ot::to_string(i.kind)).c_str(),
                  i.message.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal multi-object video grounding on precomputed features"};
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  add_model_options(app, g);

  // synth
  ot::SynthRequest synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  c_synth->add_option("--out", synth.out_dir, "output directory")->required();
  c_synth->add_option("--count", synth.count, "number of videos")->capture_default_str();
  c_synth->add_option("--frames", synth.sample.frames, "frames per video")->capture_default_str();
  c_synth->add_option("--targets", synth.sample.targets, "targets per video (0 = random 1..10)")->capture_default_str();
  c_synth->add_option("--margin", synth.sample.margin, "planted cell margin")->capture_default_str();

  // init
  std::string init_out;
  auto* c_init = app.add_subcommand("init", "write a freshly initialized checkpoint");
  c_init->add_option("--out", init_out, "checkpoint path")->required();

  // forward
  std::string manifest_path, params_path, raw_out, tubes_out;
  auto* c_forward = app.add_subcommand("forward", "run the network over a dataset");
  c_forward->add_option("--manifest", manifest_path, "dataset manifest")->required();
  c_forward->add_option("--params", params_path, "checkpoint (default: initialize from --seed)");
  c_forward->add_option("--out", raw_out, "raw output JSON")->required();
  c_forward->add_option("--tubes", tubes_out, "also write linked tube predictions");

  // link
  std::string raw_in, link_out;
  auto* c_link = app.add_subcommand("link", "build tubes from saved raw outputs");
  c_link->add_option("--manifest", manifest_path, "dataset manifest")->required();
  c_link->add_option("--raw", raw_in, "raw output JSON from forward")->required();
  c_link->add_option("--out", link_out, "tube predictions JSON")->required();

  // eval
  std::string preds_in, report_out;
  std::vector<double> thresholds{0.3, 0.5};
  bool strict = false, oracle = false;
  auto* c_eval = app.add_subcommand("eval", "score tube predictions");
  c_eval->add_option("--manifest", manifest_path, "dataset manifest")->required();
  c_eval->add_option("--predictions", preds_in, "tube predictions JSON");
  c_eval->add_flag("--oracle", oracle, "score the ground truth against itself");
  c_eval->add_option("--report", report_out, "write the JSON report here");
  c_eval->add_option("--thresholds", thresholds, "vIoU@R thresholds")->capture_default_str();
  c_eval->add_flag("--strict", strict, "fail when a video has no prediction");

  // validate / stats
  auto* c_validate = app.add_subcommand("validate", "check every record of a dataset");
  c_validate->add_option("--manifest", manifest_path, "dataset manifest")->required();
  std::string stats_out;
  auto* c_stats = app.add_subcommand("stats", "summarize a dataset");
  c_stats->add_option("--manifest", manifest_path, "dataset manifest")->required();
  c_stats->add_option("--out", stats_out, "write JSON here instead of stdout");

  // gradcheck
  ot::GradcheckOptions gc;
  auto* c_grad = app.add_subcommand("gradcheck", "compare analytic loss gradients with finite differences");
  c_grad->add_option("--instances", gc.instances, "random instances")->capture_default_str();
  c_grad->add_option("--step", gc.step, "central difference step")->capture_default_str();
  c_grad->add_option("--tolerance", gc.tolerance, "maximum relative error")->capture_default_str();
  c_grad->add_flag("--corrupt-gradient", gc.corrupt, "perturb the analytic gradient (self-test)")->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    g.model.similarity = ot::parse_similarity(g.similarity);
    g.model.validate();

    if (*c_synth) {
      synth.seed = g.seed;
      synth.jobs = g.jobs;
      synth.sample.grid_h = static_cast<std::uint32_t>(g.model.grid_h);
      synth.sample.grid_w = static_cast<std::uint32_t>(g.model.grid_w);
      synth.sample.appearance_dim = static_cast<std::uint32_t>(g.model.appearance_dim);
      synth.sample.motion_dim = static_cast<std::uint32_t>(g.model.motion_dim);
      synth.sample.text_dim = static_cast<std::uint32_t>(g.model.text_dim);
      synth.sample.max_text = g.model.max_text;
      const auto m = ot::run_synth(synth);
      std::printf("wrote %zu videos to %s (seed %llu)\n", m.samples.size(), synth.out_dir.c_str(),
                  static_cast<unsigned long long>(g.seed));
      return kOk;
    }
    if (*c_init) {
      const auto ck = ot::init_checkpoint(g.model, g.seed);
      ot::write_checkpoint(init_out, ck);
      std::printf("wrote %zu tensors to %s (seed %llu)\n", ck.params.size(), init_out.c_str(),
                  static_cast<unsigned long long>(g.seed));
      return kOk;
    }
    if (*c_forward) {
      const auto m = ot::load_manifest(manifest_path);
      const auto [model, seed] = ot::load_model(g.model, params_path, g.seed);
      const auto r = ot::run_forward(m, model, seed, g.jobs);
      write_json(raw_out, ot::raw_outputs_to_json(r.outputs, seed));
      if (!tubes_out.empty()) write_json(tubes_out, ot::predictions_to_json(r.predictions, seed));
      std::printf("forwarded %zu videos\n", r.outputs.size());
      return kOk;
    }
    if (*c_link) {
      const auto m = ot::load_manifest(manifest_path);
      const auto raw = ot::load_raw_outputs(raw_in);
      write_json(link_out, ot::predictions_to_json(ot::run_link(m, raw, g.jobs), g.seed));
      std::printf("linked %zu videos\n", raw.size());
      return kOk;
    }
    if (*c_eval) {
      const auto m = ot::load_manifest(manifest_path);
      std::map<std::string, ot::VideoPrediction> preds;
      if (oracle) {
        for (auto& p : ot::oracle_predictions(m)) preds.emplace(p.video_id, std::move(p));
      } else {
        if (preds_in.empty()) throw ot::Error(ot::ErrorKind::invalid_argument, "eval needs --predictions or --oracle");
        preds = ot::load_predictions(preds_in);
      }
      const auto out = ot::run_eval(m, preds, thresholds, strict, g.jobs);
      for (const auto& w : out.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::fputs(ot::format_table(out.report).c_str(), stdout);
      if (!report_out.empty()) write_json(report_out, ot::to_json(out.report));
      return kOk;
    }
    if (*c_validate) {
      const auto m = ot::load_manifest(manifest_path);
      const auto r = ot::validate_dataset(m);
      print_issues(r);
      std::printf("%zu of %zu records valid\n", r.records.size() - r.failures(), r.records.size());
      return r.failures() ? kFailed : kOk;
    }
    if (*c_stats) {
      const auto m = ot::load_manifest(manifest_path);
      const auto j = ot::to_json(ot::compute_stats(ot::load_records(m)));
      if (stats_out.empty())
        std::printf("%s\n", j.dump(2).c_str());
      else
        write_json(stats_out, j);
      return kOk;
    }
    if (*c_grad) {
      const auto r = ot::run_gradcheck(g.seed, gc);
      std::printf("instances %zu (redrawn near kinks: %zu)\n", r.instances, r.redrawn);
      std::printf("max relative error  L_u %.3e  L_l %.3e  L_c %.3e  L_k %.3e\n", r.box_overlap, r.box_l1, r.cls, r.kl);
      const bool ok = r.worst() <= gc.tolerance;
      std::printf("%s (tolerance %.1e)\n", ok ? "PASS" : "FAIL", gc.tolerance);
      return ok ? kOk : kFailed;
    }
  } catch (const ot::AnnotationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  } catch (const ot::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(ot::to_string(e.kind())).c_str(), e.what());
    return e.kind() == ot::ErrorKind::io_error ? kIo : kFailed;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  }
  return kOk;
}
