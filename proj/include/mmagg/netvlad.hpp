#pragma once

#include "mmagg/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace mmagg {

/// Learnable VLAD parameters for one modality: soft-assignment logits
/// X*W + b over K clusters, residuals against centers C.
template <typename S>
struct VladParams {
  Mat<S> assign_weights;  // d x K
  Vec<S> assign_bias;     // K
  Mat<S> centers;         // d x K
  S norm_eps = S(1e-12);

  Eigen::Index dim() const { return centers.rows(); }
  Eigen::Index clusters() const { return centers.cols(); }

  void check_shapes() const {
    require(assign_weights.rows() == centers.rows() && assign_weights.cols() == centers.cols(),
            "vlad params: weight/center shape mismatch");
    require(assign_bias.size() == centers.cols(), "vlad params: bias/center shape mismatch");
  }
};

/// Row-wise softmax of X*W + b with max subtraction; rows of the result sum
/// to one. Rows correspond to input rows (no reordering).
template <typename S>
Mat<S> soft_assign(const VladParams<S>& params, const Mat<S>& frames) {
  params.check_shapes();
  require(frames.cols() == params.dim(), "soft_assign: frame dim mismatch");
  Mat<S> logits = frames * params.assign_weights;
  logits.rowwise() += params.assign_bias.transpose();
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S row_max = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - row_max).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

// Rows are accumulated in a canonical content order (lexicographic) so the
// encoding is bit-exact under any permutation of the input frames.
template <typename S>
std::vector<Eigen::Index> canonical_row_order(const Mat<S>& frames) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(frames.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < frames.cols(); ++j) {
      if (frames(a, j) != frames(b, j)) return frames(a, j) < frames(b, j);
    }
    return a < b;
  });
  return order;
}

template <typename S>
struct VladCache {
  std::vector<Eigen::Index> order;  // canonical row order used for accumulation
  Mat<S> sorted_frames;             // S x d
  Mat<S> assign;                    // S x K, rows follow sorted_frames
  Mat<S> residuals;                 // d x K, pre-normalization V
  Vec<S> col_norm;                  // K
  Mat<S> intra;                     // d x K, per-column normalized
  S global_norm = S(0);
};

/// VLAD encoding: V(j,k) = sum_i assign(i,k) * (X(i,j) - C(j,k)), followed by
/// per-cluster L2 normalization and a global L2 normalization. The result is
/// flattened cluster-major: out[k*d + j] = V(j,k).
template <typename S>
Vec<S> vlad_forward(const VladParams<S>& params, const Mat<S>& frames,
                    VladCache<S>* cache = nullptr) {
  params.check_shapes();
  require(frames.rows() >= 1, "vlad_forward: need at least one frame");
  require(frames.cols() == params.dim(), "vlad_forward: frame dim mismatch");
  const Eigen::Index d = params.dim();
  const Eigen::Index k = params.clusters();

  VladCache<S> local;
  VladCache<S>& c = cache != nullptr ? *cache : local;
  c.order = canonical_row_order(frames);
  c.sorted_frames.resize(frames.rows(), d);
  for (Eigen::Index i = 0; i < frames.rows(); ++i)
    c.sorted_frames.row(i) = frames.row(c.order[static_cast<std::size_t>(i)]);

  c.assign = soft_assign(params, c.sorted_frames);

  const Vec<S> mass = c.assign.colwise().sum().transpose();  // K
  c.residuals = c.sorted_frames.transpose() * c.assign;      // d x K
  for (Eigen::Index kk = 0; kk < k; ++kk)
    c.residuals.col(kk) -= params.centers.col(kk) * mass[kk];

  c.col_norm.resize(k);
  c.intra.resize(d, k);
  for (Eigen::Index kk = 0; kk < k; ++kk) {
    c.col_norm[kk] = std::sqrt(c.residuals.col(kk).squaredNorm() + params.norm_eps);
    c.intra.col(kk) = c.residuals.col(kk) / c.col_norm[kk];
  }
  c.global_norm = std::sqrt(c.intra.squaredNorm() + params.norm_eps);

  Vec<S> out(k * d);
  for (Eigen::Index kk = 0; kk < k; ++kk)
    for (Eigen::Index j = 0; j < d; ++j) out[kk * d + j] = c.intra(j, kk) / c.global_norm;
  return out;
}

template <typename S>
struct VladGrads {
  Mat<S> assign_weights;  // d x K
  Vec<S> assign_bias;     // K
  Mat<S> centers;         // d x K
  Mat<S> frames;          // S x d, rows match the original input order
};

/// Exact gradients of vlad_forward through both normalizations and the
/// softmax. `cache` must come from the matching forward call.
template <typename S>
VladGrads<S> vlad_backward(const VladParams<S>& params, const VladCache<S>& cache,
                           const Vec<S>& grad_out) {
  const Eigen::Index d = params.dim();
  const Eigen::Index k = params.clusters();
  const Eigen::Index n = cache.sorted_frames.rows();
  require(grad_out.size() == d * k, "vlad_backward: gradient size mismatch");

  Mat<S> g2(d, k);  // gradient wrt the globally normalized code, unflattened
  for (Eigen::Index kk = 0; kk < k; ++kk)
    for (Eigen::Index j = 0; j < d; ++j) g2(j, kk) = grad_out[kk * d + j];

  // Global normalization: V2 = V1 / sqrt(|V1|^2 + eps).
  const S gn = cache.global_norm;
  const S inner_global = (g2.array() * cache.intra.array()).sum();
  Mat<S> g1 = g2 / gn - cache.intra * (inner_global / (gn * gn * gn));

  // Intra normalization per column: V1_k = V0_k / sqrt(|V0_k|^2 + eps).
  Mat<S> g0(d, k);
  for (Eigen::Index kk = 0; kk < k; ++kk) {
    const S nk = cache.col_norm[kk];
    const S inner = g1.col(kk).dot(cache.residuals.col(kk));
    g0.col(kk) = g1.col(kk) / nk - cache.residuals.col(kk) * (inner / (nk * nk * nk));
  }

  const Vec<S> mass = cache.assign.colwise().sum().transpose();

  VladGrads<S> grads;
  grads.centers.resize(d, k);
  for (Eigen::Index kk = 0; kk < k; ++kk) grads.centers.col(kk) = -g0.col(kk) * mass[kk];

  // d residual / d assign(i,k) = X_i - C_k.
  Mat<S> g_assign = cache.sorted_frames * g0;  // S_frames x K
  const Vec<S> center_dot = (params.centers.array() * g0.array()).colwise().sum().transpose();
  g_assign.rowwise() -= center_dot.transpose();

  // Softmax backward per row.
  Mat<S> g_logits(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S dot = g_assign.row(i).dot(cache.assign.row(i));
    g_logits.row(i) =
        cache.assign.row(i).array() * (g_assign.row(i).array() - dot);
  }

  grads.assign_weights = cache.sorted_frames.transpose() * g_logits;
  grads.assign_bias = g_logits.colwise().sum().transpose();

  const Mat<S> g_frames_sorted = cache.assign * g0.transpose() + g_logits * params.assign_weights.transpose();
  grads.frames.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    grads.frames.row(cache.order[static_cast<std::size_t>(i)]) = g_frames_sorted.row(i);
  return grads;
}

}  // namespace mmagg
