#pragma once

#include "mmagg/pipeline.hpp"

#include <string>
#include <vector>

namespace mmagg {

/// Zero-pad ablation for one video and one class: the seeded forward pass is
/// re-run with each modality's input features replaced by zeros (same
/// sampled indices); contribution = full - padded.
struct AblationReport {
  std::string video_id;
  int class_index = 0;
  double full_probability = 0.0;
  std::vector<std::string> modalities;
  std::vector<double> padded_probability;  // per modality
  std::vector<double> contribution;        // per modality, full - padded
};

AblationReport modality_contribution(const AggregationModelF& model, const LoadedVideo& video,
                                     int class_index, std::uint64_t seed);

/// Per-cluster soft-assignment mass over the video's sampled frames, plus
/// the same masses recomputed under the zero-pad (the paper's shading signal
/// as a numeric column).
struct AssignmentHistogram {
  std::string video_id;
  std::string modality;
  VecD mass;         // K, sums to the sampled frame count
  VecD padded_mass;  // K, assignment mass of the zeroed input
  double frame_count = 0.0;
};

AssignmentHistogram assignment_histogram(const AggregationModelF& model, const LoadedVideo& video,
                                         const std::string& modality, std::uint64_t seed);

struct TimelinePoint {
  double t = 0.0;
  double probability = 0.0;
};

/// Class probability over growing prefixes: all rows with timestamp <= t,
/// sampled down to the model's sample size when larger. Points at multiples
/// of step_s, plus the full duration.
std::vector<TimelinePoint> probability_timeline(const AggregationModelF& model,
                                                const LoadedVideo& video, int class_index,
                                                double step_s, std::uint64_t seed);

struct ClusterFrame {
  std::string video_id;
  double timestamp = 0.0;
  double weight = 0.0;  // soft-assignment value for the cluster
};

/// The top_n highest assignment weights for one cluster over every sampled
/// frame of the dataset; ties break by (video id, timestamp).
std::vector<ClusterFrame> top_frames_for_cluster(const AggregationModelF& model,
                                                 const std::vector<LoadedVideo>& dataset,
                                                 const std::string& modality, int cluster,
                                                 int top_n, std::uint64_t seed);

enum class ExportFormat { Csv, Json, Svg };

ExportFormat parse_export_format(const std::string& name);

void export_report(const AblationReport& report, const std::string& path, ExportFormat format);
void export_report(const AssignmentHistogram& report, const std::string& path,
                   ExportFormat format);
void export_report(const std::vector<TimelinePoint>& timeline, const std::string& path,
                   ExportFormat format);
void export_report(const std::vector<ClusterFrame>& frames, const std::string& path,
                   ExportFormat format);

}  // namespace mmagg
