// Grounds one synthetic query end to end: features -> model -> tubes -> scores.
// The model is freshly initialized, so its tubes are arbitrary; the point is the
// data flow and the shapes. Ground truth fed back as a prediction scores 1.

#include <cstdio>

#include "omnitube/harness.hpp"

namespace ot = omnitube;

int main() {
  ot::SynthConfig synth;
  synth.seed = 42;
  synth.frames = 8;
  synth.targets = 3;
  const ot::SynthSample sample = ot::synthesize(synth);
  const ot::AnnotationRecord& rec = sample.record;
  std::printf("query: \"%s\" (%zu targets, frames %d-%d of %d)\n", rec.query.c_str(), rec.targets.size(),
              rec.segment.start, rec.segment.end, rec.frames);

  ot::ModelConfig cfg;
  cfg.heads = 4;
  cfg.encoder_layers = cfg.decoder_layers = 2;
  const ot::Model model = ot::Model::initialized(cfg, 7);
  const ot::PredictionSet out = model.forward(sample.features);
  const auto& boxes = out.spatial.boxes;
  std::printf("boxes [%zu x %zu x 4], class slots %zu, predicted segment %d-%d\n", boxes.extent(0), boxes.extent(1),
              out.spatial.class_probs.extent(2), out.temporal.segment.start, out.temporal.segment.end);

  const ot::VideoPrediction pred = ot::link_video(ot::raw_output(rec.video_id, out), rec.mentions);
  for (const auto& t : pred.tubes)
    std::printf("  tube \"%s\" frames %d-%d\n", t.word.c_str(), t.segment.start, t.segment.end);

  const ot::SampleScore untrained = ot::score_sample(rec, &pred);
  const ot::VideoPrediction truth{rec.video_id, rec.segment, ot::ground_truth_tubes(rec)};
  const ot::SampleScore perfect = ot::score_sample(rec, &truth);
  std::printf("untrained model: tIoU %.3f vIoU %.3f\n", untrained.tiou, untrained.viou);
  std::printf("ground truth:    tIoU %.3f vIoU %.3f\n", perfect.tiou, perfect.viou);
  return perfect.viou == 1.0 ? 0 : 1;
}
