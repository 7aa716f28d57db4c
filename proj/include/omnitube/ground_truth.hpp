#pragma once

#include <cstddef>
#include <vector>

#include "omnitube/geometry.hpp"

namespace omnitube {

/// One annotated object as seen by training code: its supervision slot in
/// the class distribution and one box per frame of the shared segment.
struct TargetTrack {
  std::size_t slot = 0;
  std::vector<Box> boxes;  // boxes[t - segment.start]
};

struct GroundTruth {
  Segment segment;
  std::vector<TargetTrack> targets;

  const Box& box(std::size_t target, int frame) const {
    return targets[target].boxes[static_cast<std::size_t>(frame - segment.start)];
  }
};

enum class BoxLoss { giou, iou };

enum class MatchGranularity { tube, frame };

/// Loss and matching weights; defaults are the published values.
struct LossWeights {
  double iou = 3.0;        // box overlap term
  double l1 = 5.0;         // box regression term
  double cls = 1.0;        // classification term
  double hungarian = 2.0;  // weight of the matched-set loss in the total
  double kl = 1.0;         // weight of each temporal KL term in the total
  double no_object = 0.1;  // down-weight for queries trained toward no-object
};

}  // namespace omnitube
