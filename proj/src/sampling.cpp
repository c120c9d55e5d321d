#include "mmagg/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mmagg {

Eigen::Index Segment::row_count(const std::string& modality) const {
  auto it = ranges.find(modality);
  require(it != ranges.end(), "segment: no range for modality '" + modality + "'");
  return it->second.second - it->second.first;
}

namespace {

// Smallest i with i / fps >= t. The membership rule compares i / fps, so the
// candidate from t * fps is corrected by direct comparison.
Eigen::Index first_row_at(double t, double fps) {
  auto idx = static_cast<Eigen::Index>(std::floor(t * fps));
  if (idx < 0) idx = 0;
  while (idx > 0 && static_cast<double>(idx - 1) / fps >= t) --idx;
  while (static_cast<double>(idx) / fps < t) ++idx;
  return idx;
}

}  // namespace

std::vector<Segment> segment_video(const VideoRecord& record,
                                   const std::vector<ModalitySpec>& modalities) {
  require(record.duration_s > 0.0, "segment_video: duration must be positive");
  const int count = static_cast<int>(std::ceil(record.duration_s / kSegmentSeconds));
  std::vector<Segment> segments;
  segments.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    Segment seg;
    seg.video_id = record.id;
    seg.index = s;
    seg.start_s = kSegmentSeconds * s;
    seg.end_s = std::min(record.duration_s, kSegmentSeconds * (s + 1));
    for (const auto& spec : modalities) {
      seg.ranges[spec.name] = {first_row_at(seg.start_s, spec.fps),
                               first_row_at(seg.end_s, spec.fps)};
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<Eigen::Index> sample_indices(Eigen::Index begin, Eigen::Index end, int sample_size,
                                         Rng& rng) {
  require(end > begin, "sample_indices: empty range");
  require(sample_size >= 1, "sample_indices: sample size must be >= 1");
  const Eigen::Index available = end - begin;
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(sample_size));
  if (available >= sample_size) {
    // Floyd's algorithm: sample_size distinct values from [0, available).
    std::set<Eigen::Index> chosen;
    for (Eigen::Index j = available - sample_size; j < available; ++j) {
      const auto t = static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(j) + 1));
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    for (Eigen::Index idx : chosen) out.push_back(begin + idx);
  } else {
    for (int j = 0; j < sample_size; ++j)
      out.push_back(begin + static_cast<Eigen::Index>(
                                rng.next_below(static_cast<std::uint64_t>(available))));
    std::sort(out.begin(), out.end());
  }
  return out;
}

std::vector<Eigen::Index> sample_frames(const Segment& segment, const ModalitySpec& modality,
                                        int sample_size, Rng& rng) {
  auto it = segment.ranges.find(modality.name);
  require(it != segment.ranges.end(),
          "sample_frames: segment has no range for modality '" + modality.name + "'");
  require(it->second.second > it->second.first,
          "sample_frames: empty segment for modality '" + modality.name + "' in video '" +
              segment.video_id + "'");
  return sample_indices(it->second.first, it->second.second, sample_size, rng);
}

std::uint64_t segment_seed(std::uint64_t base_seed, const std::string& video_id,
                           int segment_index, std::uint64_t epoch) {
  std::uint64_t h = hash_str(base_seed, video_id);
  h = hash_u64(h, static_cast<std::uint64_t>(segment_index));
  return hash_u64(h, epoch);
}

Eigen::Index rows_strictly_before(double t, double fps) {
  require(fps > 0.0, "rows_strictly_before: fps must be positive");
  return first_row_at(t, fps);
}

MatF gather_rows(const FeatureSequence& seq, const std::vector<Eigen::Index>& indices) {
  MatF out(static_cast<Eigen::Index>(indices.size()), seq.dim());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < seq.count(),
            "gather_rows: index out of range for modality '" + seq.modality + "'");
    out.row(static_cast<Eigen::Index>(i)) = seq.data.row(indices[i]);
  }
  return out;
}

}  // namespace mmagg
