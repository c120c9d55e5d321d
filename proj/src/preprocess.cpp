#include "mmagg/preprocess.hpp"

#include "mmagg/checkpoint.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace mmagg {

void PreprocessModel::validate() const {
  require(basis.rows() == mean.size(), "preprocess model: mean/basis dimension mismatch");
  require(basis.cols() == eigenvalues.size(), "preprocess model: basis/eigenvalue count mismatch");
  require(basis.cols() <= basis.rows(), "preprocess model: more components than input dims");
  require(whiten_eps > 0.0, "preprocess model: whiten_eps must be positive");
  require(clip_bound > 0.0, "preprocess model: clip_bound must be positive");
  require(levels == 256, "preprocess model: quantizer is 8-bit (levels = 256)");
  const MatD gram = basis.transpose() * basis;
  const double ortho_err =
      (gram - MatD::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
  require(ortho_err <= 1e-8, "preprocess model: basis not orthonormal");
  for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
    require(eigenvalues[j] >= 0.0, "preprocess model: negative eigenvalue");
    if (j > 0)
      require(eigenvalues[j] <= eigenvalues[j - 1] + 1e-12,
              "preprocess model: eigenvalues not sorted");
  }
}

PreprocessModel fit_pca(const MatD& samples, int target_dim, double whiten_eps,
                        double clip_bound) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  require(n >= 2, "fit_pca: need at least 2 samples");
  require(target_dim >= 1, "fit_pca: target_dim must be >= 1");
  require(target_dim <= std::min<Eigen::Index>(n - 1, dim),
          "fit_pca: target_dim exceeds min(N-1, D)");
  require(all_finite(samples), "fit_pca: non-finite sample values");

  PreprocessModel model;
  model.whiten_eps = whiten_eps;
  model.clip_bound = clip_bound;
  model.mean = samples.colwise().mean().transpose();

  const MatD centered = samples.rowwise() - model.mean.transpose();
  const MatD cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<MatD> solver(cov);
  require(solver.info() == Eigen::Success, "fit_pca: eigendecomposition failed");

  // Eigen returns eigenvalues ascending; keep the top target_dim, descending.
  model.basis.resize(dim, target_dim);
  model.eigenvalues.resize(target_dim);
  for (int j = 0; j < target_dim; ++j) {
    const Eigen::Index src = dim - 1 - j;
    model.eigenvalues[j] = std::max(0.0, solver.eigenvalues()[src]);
    VecD col = solver.eigenvectors().col(src);
    Eigen::Index max_idx = 0;
    col.cwiseAbs().maxCoeff(&max_idx);
    if (col[max_idx] < 0.0) col = -col;
    model.basis.col(j) = col;
  }
  model.validate();
  return model;
}

VecD transform_unclipped(const PreprocessModel& model, const VecD& x) {
  require(x.size() == model.input_dim(), "transform: input dimension mismatch");
  require(all_finite(x), "transform: non-finite input");
  VecD y = model.basis.transpose() * (x - model.mean);
  for (Eigen::Index j = 0; j < y.size(); ++j)
    y[j] /= std::sqrt(model.eigenvalues[j] + model.whiten_eps);
  return y;
}

VecD transform(const PreprocessModel& model, const VecD& x) {
  VecD y = transform_unclipped(model, x);
  const double b = model.clip_bound;
  for (Eigen::Index j = 0; j < y.size(); ++j) y[j] = std::clamp(y[j], -b, b);
  return y;
}

MatD transform_rows(const PreprocessModel& model, const MatD& rows) {
  MatD out(rows.rows(), model.output_dim());
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    out.row(i) = transform(model, rows.row(i).transpose()).transpose();
  return out;
}

std::uint8_t quantize_value(double y, double clip_bound, int levels) {
  require(levels >= 2 && levels <= 256, "quantize: levels out of range");
  require(clip_bound > 0.0, "quantize: clip bound must be positive");
  const double clipped = std::clamp(y, -clip_bound, clip_bound);
  // std::round is half away from zero, which the code lattice depends on.
  const double code = std::round((clipped + clip_bound) / (2.0 * clip_bound) *
                                 static_cast<double>(levels - 1));
  return static_cast<std::uint8_t>(std::clamp(code, 0.0, static_cast<double>(levels - 1)));
}

double dequantize_value(std::uint8_t code, double clip_bound, int levels) {
  require(levels >= 2 && levels <= 256, "dequantize: levels out of range");
  require(code < levels, "dequantize: code out of range");
  return static_cast<double>(code) / static_cast<double>(levels - 1) * 2.0 * clip_bound -
         clip_bound;
}

std::vector<std::uint8_t> quantize(const VecD& y, double clip_bound, int levels) {
  std::vector<std::uint8_t> codes(static_cast<std::size_t>(y.size()));
  for (Eigen::Index j = 0; j < y.size(); ++j)
    codes[static_cast<std::size_t>(j)] = quantize_value(y[j], clip_bound, levels);
  return codes;
}

VecD dequantize(const std::vector<std::uint8_t>& codes, double clip_bound, int levels) {
  VecD y(static_cast<Eigen::Index>(codes.size()));
  for (std::size_t j = 0; j < codes.size(); ++j)
    y[static_cast<Eigen::Index>(j)] = dequantize_value(codes[j], clip_bound, levels);
  return y;
}

void save_preprocess_model(const PreprocessModel& model, const std::string& path) {
  model.validate();
  TensorTable table;
  table.add(Tensor::from_f64("mean", {static_cast<std::uint64_t>(model.mean.size())},
                             {model.mean.data(), model.mean.data() + model.mean.size()}));
  std::vector<double> basis_rm;
  basis_rm.reserve(static_cast<std::size_t>(model.basis.size()));
  for (Eigen::Index i = 0; i < model.basis.rows(); ++i)
    for (Eigen::Index j = 0; j < model.basis.cols(); ++j) basis_rm.push_back(model.basis(i, j));
  table.add(Tensor::from_f64("basis",
                             {static_cast<std::uint64_t>(model.basis.rows()),
                              static_cast<std::uint64_t>(model.basis.cols())},
                             std::move(basis_rm)));
  table.add(Tensor::from_f64(
      "eigenvalues", {static_cast<std::uint64_t>(model.eigenvalues.size())},
      {model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size()}));
  table.add(Tensor::scalar_f64("whiten_eps", model.whiten_eps));
  table.add(Tensor::scalar_f64("clip_bound", model.clip_bound));
  table.add(Tensor::scalar_f64("levels", static_cast<double>(model.levels)));
  write_tensor_table(table, path);
}

PreprocessModel load_preprocess_model(const std::string& path) {
  const TensorTable table = read_tensor_table(path);
  PreprocessModel model;
  const Tensor& mean = table.get("mean");
  const Tensor& basis = table.get("basis");
  const Tensor& eig = table.get("eigenvalues");
  require(basis.dims.size() == 2, "preprocess model: basis must be rank 2");
  model.mean = Eigen::Map<const VecD>(mean.f64.data(), static_cast<Eigen::Index>(mean.f64.size()));
  model.basis.resize(static_cast<Eigen::Index>(basis.dims[0]),
                     static_cast<Eigen::Index>(basis.dims[1]));
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < model.basis.rows(); ++i)
    for (Eigen::Index j = 0; j < model.basis.cols(); ++j) model.basis(i, j) = basis.f64[idx++];
  model.eigenvalues =
      Eigen::Map<const VecD>(eig.f64.data(), static_cast<Eigen::Index>(eig.f64.size()));
  model.whiten_eps = table.get("whiten_eps").f64.at(0);
  model.clip_bound = table.get("clip_bound").f64.at(0);
  model.levels = static_cast<int>(table.get("levels").f64.at(0));
  model.validate();
  return model;
}

}  // namespace mmagg
