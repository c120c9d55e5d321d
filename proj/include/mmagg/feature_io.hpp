#pragma once

#include "mmagg/common.hpp"

#include <string>

namespace mmagg {

/// One video's feature matrix for one modality. Row i carries the implicit
/// timestamp i / fps seconds; timestamps are never stored.
struct FeatureSequence {
  std::string modality;  // filled by the caller; the file does not store it
  double fps = 1.0;
  MatF data;  // T x D, row-major

  Eigen::Index count() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }

  void validate() const;
};

/// Reads a feature file; quantized payloads come back dequantized.
FeatureSequence read_features(const std::string& path);

/// Writes raw 32-bit values, or 8-bit codes over [-clip_bound, clip_bound]
/// when quantize is set.
void write_features(const FeatureSequence& seq, const std::string& path, bool quantize,
                    double clip_bound = 2.5);

}  // namespace mmagg
