#include "mmagg/pipeline.hpp"

#include <algorithm>

namespace mmagg {

namespace {

void clamp_segments(std::vector<Segment>& segments, const FeatureMap& features) {
  for (auto& seg : segments) {
    for (auto& [name, range] : seg.ranges) {
      auto it = features.find(name);
      if (it == features.end()) continue;
      range.first = std::min(range.first, it->second.count());
      range.second = std::min(range.second, it->second.count());
    }
  }
}

}  // namespace

LoadedVideo load_video(const Manifest& manifest, const VideoRecord& record,
                       const ModelConfig& config) {
  LoadedVideo out;
  out.record = record;
  for (const auto& spec : config.modalities) {
    auto it = record.features.find(spec.name);
    require(it != record.features.end(),
            "video '" + record.id + "': missing feature file for modality '" + spec.name + "'");
    FeatureSequence seq = read_features(manifest.resolve_path(it->second));
    seq.modality = spec.name;
    require(seq.dim() == spec.dim,
            "video '" + record.id + "' modality '" + spec.name + "': feature dim " +
                std::to_string(seq.dim()) + " does not match configured dim " +
                std::to_string(spec.dim));
    out.features[spec.name] = std::move(seq);
  }
  out.segments = segment_video(record, config.modalities);
  clamp_segments(out.segments, out.features);
  return out;
}

std::vector<LoadedVideo> load_dataset(const Manifest& manifest, const ModelConfig& config) {
  require(!manifest.videos.empty(), "dataset is empty");
  std::vector<LoadedVideo> out;
  out.reserve(manifest.videos.size());
  for (const auto& record : manifest.videos) out.push_back(load_video(manifest, record, config));
  return out;
}

SegmentSample sample_segment(const ModelConfig& config, const Segment& segment,
                             const FeatureMap& features, std::uint64_t seed) {
  SegmentSample sample;
  Rng rng(seed);
  for (const auto& spec : config.modalities) {
    auto it = features.find(spec.name);
    require(it != features.end(), "sample_segment: missing features for '" + spec.name + "'");
    std::vector<Eigen::Index> idx = sample_frames(segment, spec, config.sample_size, rng);
    sample.inputs.push_back(gather_rows(it->second, idx));
    sample.indices[spec.name] = std::move(idx);
  }
  return sample;
}

VecD segment_forward(const AggregationModelF& model, const SegmentSample& sample) {
  const VecF y = model_forward(model, sample.inputs);
  return y.cast<double>();
}

VecD predict_single_pass(const AggregationModelF& model, const LoadedVideo& video,
                         std::uint64_t pass_seed) {
  require(!video.segments.empty(), "predict: video '" + video.record.id + "' has no segments");
  VecD total = VecD::Zero(model.config.classes);
  for (const auto& segment : video.segments) {
    const std::uint64_t seed = segment_seed(pass_seed, video.record.id, segment.index, 0);
    const SegmentSample sample = sample_segment(model.config, segment, video.features, seed);
    total += segment_forward(model, sample);
  }
  return total / static_cast<double>(video.segments.size());
}

VecD repeated_eval_average(const AggregationModelF& model, const LoadedVideo& video, int repeats,
                           std::uint64_t base_seed) {
  require(repeats >= 1, "repeated_eval_average: repeats must be >= 1");
  VecD total = VecD::Zero(model.config.classes);
  for (int r = 0; r < repeats; ++r)
    total += predict_single_pass(model, video, base_seed + static_cast<std::uint64_t>(r));
  return total / static_cast<double>(repeats);
}

}  // namespace mmagg
