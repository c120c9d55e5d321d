#pragma once

#include "mmagg/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmagg {

/// Fitted per-modality preprocessing: PCA projection, whitening, clipping
/// and the 8-bit quantizer parameters.
struct PreprocessModel {
  VecD mean;         // D
  MatD basis;        // D x d, columns are eigenvectors, eigenvalue-descending
  VecD eigenvalues;  // d, non-increasing, >= 0
  double whiten_eps = 1e-6;
  double clip_bound = 2.5;
  int levels = 256;

  Eigen::Index input_dim() const { return basis.rows(); }
  Eigen::Index output_dim() const { return basis.cols(); }

  /// Checks orthonormality (1e-8), eigenvalue ordering and positivity.
  void validate() const;
};

/// PCA fit on row-major samples (one sample per row). The basis comes from
/// the eigendecomposition of the sample covariance (divisor N-1); each
/// eigenvector's sign is fixed so its largest-magnitude entry is positive.
PreprocessModel fit_pca(const MatD& samples, int target_dim, double whiten_eps = 1e-6,
                        double clip_bound = 2.5);

/// Centered, projected, whitened and clipped to [-clip_bound, clip_bound].
VecD transform(const PreprocessModel& model, const VecD& x);

/// Same map without the final clip; used for whitening diagnostics.
VecD transform_unclipped(const PreprocessModel& model, const VecD& x);

/// Row-wise transform of a T x D matrix.
MatD transform_rows(const PreprocessModel& model, const MatD& rows);

// 8-bit uniform quantizer over [-B, B]. Rounding is half away from zero.
std::uint8_t quantize_value(double y, double clip_bound, int levels = 256);
double dequantize_value(std::uint8_t code, double clip_bound, int levels = 256);

std::vector<std::uint8_t> quantize(const VecD& y, double clip_bound, int levels = 256);
VecD dequantize(const std::vector<std::uint8_t>& codes, double clip_bound, int levels = 256);

void save_preprocess_model(const PreprocessModel& model, const std::string& path);
PreprocessModel load_preprocess_model(const std::string& path);

}  // namespace mmagg
