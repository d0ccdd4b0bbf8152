#include "fashion/stage.hpp"

#include "fashion/error.hpp"

namespace fashion {

std::string_view stage_name(StageKind kind) {
  switch (kind) {
    case StageKind::kShape: return "shape";
    case StageKind::kImage: return "image";
    case StageKind::kOneStep87: return "one-step-8-7";
    case StageKind::kOneStep84: return "one-step-8-4";
    case StageKind::kNonComp: return "non-comp";
  }
  return "unknown";
}

StageKind parse_stage(std::string_view name) {
  for (StageKind k : {StageKind::kShape, StageKind::kImage, StageKind::kOneStep87, StageKind::kOneStep84,
                      StageKind::kNonComp}) {
    if (stage_name(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown stage '" + std::string(name) + "'");
}

GeneratorLayout generator_layout(StageKind kind, const ArchConfig& arch) {
  GeneratorLayout g;
  g.arch = arch;
  switch (kind) {
    case StageKind::kShape:
      g.cond_channels = kNumMergedLabels;
      g.cond_resolution = kConstraintSize;
      g.head_channels = kNumLabels;
      g.head = HeadActivation::kSoftmax;
      break;
    case StageKind::kImage:
      g.cond_channels = kNumLabels;
      g.cond_resolution = arch.resolution;
      g.head_channels = 3 * kNumLabels;
      g.head = HeadActivation::kTanh;
      break;
    case StageKind::kOneStep87:
      g.cond_channels = kNumLabels;
      g.cond_resolution = kConstraintSize;
      g.head_channels = 3;
      g.head = HeadActivation::kTanh;
      break;
    case StageKind::kOneStep84:
      g.cond_channels = kNumMergedLabels;
      g.cond_resolution = kConstraintSize;
      g.head_channels = 3;
      g.head = HeadActivation::kTanh;
      break;
    case StageKind::kNonComp:
      g.cond_channels = kNumLabels;
      g.cond_resolution = arch.resolution;
      g.head_channels = 3;
      g.head = HeadActivation::kTanh;
      break;
  }
  return g;
}

DiscriminatorLayout discriminator_layout(StageKind kind, const ArchConfig& arch) {
  DiscriminatorLayout d;
  d.arch = arch;
  switch (kind) {
    case StageKind::kShape: d.in_channels = kNumLabels + kNumMergedLabels; break;
    case StageKind::kImage:
    case StageKind::kNonComp:
    case StageKind::kOneStep87: d.in_channels = 3 + kNumLabels; break;
    case StageKind::kOneStep84: d.in_channels = 3 + kNumMergedLabels; break;
  }
  return d;
}

}  // namespace fashion
