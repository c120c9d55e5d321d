#pragma once

#include "mmagg/model.hpp"
#include "mmagg/sampling.hpp"

#include <map>
#include <string>
#include <vector>

namespace mmagg {

using FeatureMap = std::map<std::string, FeatureSequence>;

/// A video with its features resident and its segment ranges clamped to the
/// actual row counts.
struct LoadedVideo {
  VideoRecord record;
  FeatureMap features;
  std::vector<Segment> segments;
};

/// Loads every video of the manifest, requiring each of the model's
/// modalities to be present and consistent.
std::vector<LoadedVideo> load_dataset(const Manifest& manifest, const ModelConfig& config);

LoadedVideo load_video(const Manifest& manifest, const VideoRecord& record,
                       const ModelConfig& config);

/// One seeded draw for one segment: per-modality ascending row indices plus
/// the gathered sample matrices in config modality order.
struct SegmentSample {
  std::map<std::string, std::vector<Eigen::Index>> indices;
  std::vector<MatF> inputs;
};

SegmentSample sample_segment(const ModelConfig& config, const Segment& segment,
                             const FeatureMap& features, std::uint64_t seed);

/// Class probabilities for one segment sample, widened to double.
VecD segment_forward(const AggregationModelF& model, const SegmentSample& sample);

/// One seeded pass over a whole video: per-segment probabilities averaged
/// uniformly. Per-segment streams derive from segment_seed(pass_seed, ...).
VecD predict_single_pass(const AggregationModelF& model, const LoadedVideo& video,
                         std::uint64_t pass_seed);

/// Mean of `repeats` independent passes with seeds base_seed .. base_seed+R-1.
VecD repeated_eval_average(const AggregationModelF& model, const LoadedVideo& video, int repeats,
                           std::uint64_t base_seed);

}  // namespace mmagg
