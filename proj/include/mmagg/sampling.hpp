#pragma once

#include "mmagg/common.hpp"
#include "mmagg/manifest.hpp"
#include "mmagg/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace mmagg {

/// A ten-minute slice of an untrimmed video, with the feature-row range it
/// owns per modality: row i of modality m belongs iff start <= i/fps < end.
struct Segment {
  std::string video_id;
  int index = 0;  // position within the video's segment list
  double start_s = 0.0;
  double end_s = 0.0;
  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> ranges;  // [begin, end)

  Eigen::Index row_count(const std::string& modality) const;
};

constexpr double kSegmentSeconds = 600.0;

/// Splits [0, duration) into ceil(duration/600) segments; the last one may be
/// shorter. Row ranges are derived from each modality's feature rate.
std::vector<Segment> segment_video(const VideoRecord& record,
                                   const std::vector<ModalitySpec>& modalities);

/// Draws sample_size row indices from the segment's range for one modality:
/// distinct without replacement when enough rows exist, with replacement
/// otherwise. Returned ascending.
std::vector<Eigen::Index> sample_frames(const Segment& segment, const ModalitySpec& modality,
                                        int sample_size, Rng& rng);

/// Core index sampler over [begin, end).
std::vector<Eigen::Index> sample_indices(Eigen::Index begin, Eigen::Index end, int sample_size,
                                         Rng& rng);

/// Deterministic per-segment stream: hash(base_seed, video_id, segment_index,
/// epoch). Evaluation reuses it with the pass index in the epoch slot.
std::uint64_t segment_seed(std::uint64_t base_seed, const std::string& video_id,
                           int segment_index, std::uint64_t epoch);

/// Number of rows with timestamp i / fps strictly before t.
Eigen::Index rows_strictly_before(double t, double fps);

/// Gathers the selected rows of a sequence into a dense sample matrix.
MatF gather_rows(const FeatureSequence& seq, const std::vector<Eigen::Index>& indices);

}  // namespace mmagg
