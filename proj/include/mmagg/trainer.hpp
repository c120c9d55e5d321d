#pragma once

#include "mmagg/model.hpp"
#include "mmagg/pipeline.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mmagg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second-moment accumulators, parallel to the canonical tensor order.
template <typename S>
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<S>> first;
  std::vector<std::vector<S>> second;

  template <typename Ref>
  void init_like(const std::vector<Ref>& params) {
    first.clear();
    second.clear();
    for (const auto& p : params) {
      first.emplace_back(p.size, S(0));
      second.emplace_back(p.size, S(0));
    }
    step = 0;
  }

  bool initialized() const { return !first.empty(); }
};

/// Bias-corrected adaptive-moment update. Returns false (and leaves params
/// and moments untouched) when any gradient value is non-finite.
template <typename S>
bool adam_step(AdamState<S>& state, const AdamConfig& cfg,
               const std::vector<TensorRef<S>>& params, const std::vector<TensorRef<S>>& grads) {
  require(params.size() == grads.size(), "adam_step: tensor count mismatch");
  if (!state.initialized()) state.init_like(params);
  require(state.first.size() == params.size(), "adam_step: state/param mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(params[t].size == grads[t].size,
            "adam_step: shape mismatch for tensor " + params[t].name);
    require(state.first[t].size() == params[t].size,
            "adam_step: state shape mismatch for tensor " + params[t].name);
    for (std::size_t i = 0; i < grads[t].size; ++i)
      if (!std::isfinite(static_cast<double>(grads[t].data[i]))) return false;
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    S* p = params[t].data;
    const S* g = grads[t].data;
    auto& m = state.first[t];
    auto& v = state.second[t];
    for (std::size_t i = 0; i < params[t].size; ++i) {
      m[i] = static_cast<S>(cfg.beta1) * m[i] + static_cast<S>(1.0 - cfg.beta1) * g[i];
      v[i] = static_cast<S>(cfg.beta2) * v[i] + static_cast<S>(1.0 - cfg.beta2) * g[i] * g[i];
      const S m_hat = m[i] / static_cast<S>(bc1);
      const S v_hat = v[i] / static_cast<S>(bc2);
      p[i] -= static_cast<S>(cfg.lr) * m_hat / (std::sqrt(v_hat) + static_cast<S>(cfg.eps));
    }
  }
  return true;
}

struct TrainOptions {
  int epochs = 1;
  int batch_size = 64;
  std::uint64_t seed = 42;
  AdamConfig adam;
  int threads = 1;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean per-example loss per epoch
  int skipped_steps = 0;
};

/// Mini-batch training over segments. Fully determined by (seed, config,
/// data): shuffling, sampling and the init all derive from seeds, and batch
/// gradients fold in example order regardless of thread count.
TrainLog train(AggregationModelF& model, AdamState<float>& optimizer, const Manifest& manifest,
               const TrainOptions& options);

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool ok = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool ok = false;
};

/// Compares analytic gradients of bce(model_forward(inputs)) against central
/// finite differences, per parameter tensor and per input matrix.
GradCheckReport gradient_check(AggregationModelD& model, const std::vector<MatD>& inputs,
                               const VecD& targets, double step, double tolerance);

/// Checkpoint persistence: canonical parameter tensors (32-bit), the config
/// snapshot as a metadata blob, and optimizer moments when provided.
void save_model(const AggregationModelF& model, const std::string& path,
                const AdamState<float>* optimizer = nullptr);
AggregationModelF load_model(const std::string& path, AdamState<float>* optimizer = nullptr);

}  // namespace mmagg
