#pragma once

#include "mmagg/common.hpp"
#include "mmagg/head.hpp"
#include "mmagg/manifest.hpp"
#include "mmagg/netvlad.hpp"
#include "mmagg/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmagg {

/// Architecture snapshot carried inside every checkpoint.
struct ModelConfig {
  std::vector<ModalitySpec> modalities;  // concatenation order
  int classes = 0;
  int hidden = 1024;
  int experts = 2;
  int sample_size = 50;
  std::uint64_t seed = 42;

  Eigen::Index concat_dim() const {
    Eigen::Index m = 0;
    for (const auto& spec : modalities)
      m += static_cast<Eigen::Index>(spec.dim) * static_cast<Eigen::Index>(spec.clusters);
    return m;
  }

  void validate() const {
    require(!modalities.empty(), "model config: needs at least one modality");
    require(classes >= 1, "model config: needs at least one class");
    require(hidden >= 1, "model config: hidden size must be >= 1");
    require(experts >= 1, "model config: expert count must be >= 1");
    require(sample_size >= 1, "model config: sample size must be >= 1");
    for (const auto& spec : modalities) {
      require(spec.dim >= 1 && spec.clusters >= 1,
              "model config: modality '" + spec.name + "' needs dim and clusters >= 1");
    }
  }
};

template <typename S>
struct AggregationModel {
  ModelConfig config;
  std::vector<VladParams<S>> vlad;  // per modality, config order
  HeadParams<S> head;

  Eigen::Index modality_offset(std::size_t index) const {
    Eigen::Index off = 0;
    for (std::size_t m = 0; m < index; ++m)
      off += vlad[m].dim() * vlad[m].clusters();
    return off;
  }
};

using AggregationModelF = AggregationModel<float>;
using AggregationModelD = AggregationModel<double>;

/// Seeded init: centers and assignment weights N(0,1)/sqrt(d); head weights
/// N(0,1)/sqrt(fan-in); all biases zero. Draw order follows the canonical
/// tensor order so identical seeds give identical models.
template <typename S>
AggregationModel<S> init_model(const ModelConfig& config) {
  config.validate();
  AggregationModel<S> model;
  model.config = config;
  Rng rng(hash_u64(config.seed, 0x696e6974ULL));  // "init" stream

  auto fill_normal = [&rng](auto& m, double scale) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        m(i, j) = static_cast<S>(rng.next_normal() * scale);
  };

  for (const auto& spec : config.modalities) {
    VladParams<S> p;
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));
    p.assign_weights.resize(spec.dim, spec.clusters);
    fill_normal(p.assign_weights, scale);
    p.assign_bias = Vec<S>::Zero(spec.clusters);
    p.centers.resize(spec.dim, spec.clusters);
    fill_normal(p.centers, scale);
    model.vlad.push_back(std::move(p));
  }

  const Eigen::Index m_dim = config.concat_dim();
  const Eigen::Index h = config.hidden;
  const Eigen::Index c = config.classes;
  const Eigen::Index e = config.experts;
  auto& head = model.head;
  head.experts = config.experts;
  head.fc_weight.resize(m_dim, h);
  fill_normal(head.fc_weight, 1.0 / std::sqrt(static_cast<double>(m_dim)));
  head.fc_bias = Vec<S>::Zero(h);
  head.expert_weight.resize(c * e, h);
  fill_normal(head.expert_weight, 1.0 / std::sqrt(static_cast<double>(h)));
  head.expert_bias = Mat<S>::Zero(c, e);
  head.gate_weight.resize(c * e, h);
  fill_normal(head.gate_weight, 1.0 / std::sqrt(static_cast<double>(h)));
  head.context_weight.resize(c, c);
  fill_normal(head.context_weight, 1.0 / std::sqrt(static_cast<double>(c)));
  head.context_bias = Vec<S>::Zero(c);
  return model;
}

template <typename S>
struct ModelCache {
  std::vector<VladCache<S>> vlad;
  Vec<S> concat;
  HeadCache<S> head;
};

/// Full forward pass over per-modality sampled frame matrices (config order).
template <typename S>
Vec<S> model_forward(const AggregationModel<S>& model, const std::vector<Mat<S>>& inputs,
                     ModelCache<S>* cache = nullptr) {
  require(inputs.size() == model.vlad.size(), "model_forward: modality count mismatch");
  ModelCache<S> local;
  ModelCache<S>& c = cache != nullptr ? *cache : local;
  c.vlad.resize(model.vlad.size());
  c.concat.resize(model.config.concat_dim());
  Eigen::Index offset = 0;
  for (std::size_t m = 0; m < model.vlad.size(); ++m) {
    const Vec<S> code = vlad_forward(model.vlad[m], inputs[m], &c.vlad[m]);
    c.concat.segment(offset, code.size()) = code;
    offset += code.size();
  }
  return head_forward(model.head, c.concat, &c.head);
}

template <typename S>
struct ModelGrads {
  std::vector<VladGrads<S>> vlad;
  HeadGrads<S> head;
};

template <typename S>
ModelGrads<S> model_backward(const AggregationModel<S>& model, const ModelCache<S>& cache,
                             const Vec<S>& grad_output) {
  ModelGrads<S> grads;
  grads.head = head_backward(model.head, cache.head, grad_output);
  grads.vlad.resize(model.vlad.size());
  Eigen::Index offset = 0;
  for (std::size_t m = 0; m < model.vlad.size(); ++m) {
    const Eigen::Index len = model.vlad[m].dim() * model.vlad[m].clusters();
    const Vec<S> slice = grads.head.input.segment(offset, len);
    grads.vlad[m] = vlad_backward(model.vlad[m], cache.vlad[m], slice);
    offset += len;
  }
  return grads;
}

/// Flat view over one parameter (or gradient) tensor.
template <typename S>
struct TensorRef {
  std::string name;
  S* data = nullptr;
  std::size_t size = 0;
  std::vector<std::uint64_t> dims;
};

namespace detail {

template <typename S, typename M>
TensorRef<S> ref_of(const std::string& name, M& m, std::vector<std::uint64_t> dims) {
  return TensorRef<S>{name, m.data(), static_cast<std::size_t>(m.size()), std::move(dims)};
}

// Canonical tensor order shared by the optimizer, the checkpoint layout and
// the gradient checker.
template <typename S, typename Model>
std::vector<TensorRef<S>> refs_impl(Model& model) {
  std::vector<TensorRef<S>> refs;
  const auto& cfg = model.config;
  for (std::size_t m = 0; m < model.vlad.size(); ++m) {
    const std::string base = "vlad." + cfg.modalities[m].name + ".";
    auto& p = model.vlad[m];
    const auto d = static_cast<std::uint64_t>(p.assign_weights.rows());
    const auto k = static_cast<std::uint64_t>(p.assign_weights.cols());
    refs.push_back(ref_of<S>(base + "W", p.assign_weights, {d, k}));
    refs.push_back(ref_of<S>(base + "b", p.assign_bias, {k}));
    refs.push_back(ref_of<S>(base + "C", p.centers, {d, k}));
  }
  auto& h = model.head;
  const auto md = static_cast<std::uint64_t>(h.fc_weight.rows());
  const auto hd = static_cast<std::uint64_t>(h.fc_weight.cols());
  const auto c = static_cast<std::uint64_t>(h.expert_bias.rows());
  const auto e = static_cast<std::uint64_t>(h.expert_bias.cols());
  refs.push_back(ref_of<S>("head.fc.W", h.fc_weight, {md, hd}));
  refs.push_back(ref_of<S>("head.fc.b", h.fc_bias, {hd}));
  refs.push_back(ref_of<S>("head.moe.U", h.expert_weight, {c, e, hd}));
  refs.push_back(ref_of<S>("head.moe.bias", h.expert_bias, {c, e}));
  refs.push_back(ref_of<S>("head.moe.A", h.gate_weight, {c, e, hd}));
  refs.push_back(ref_of<S>("head.cg.G", h.context_weight, {c, c}));
  refs.push_back(ref_of<S>("head.cg.g", h.context_bias, {c}));
  return refs;
}

}  // namespace detail

template <typename S>
std::vector<TensorRef<S>> param_refs(AggregationModel<S>& model) {
  return detail::refs_impl<S>(model);
}

template <typename S>
std::vector<TensorRef<const S>> param_refs(const AggregationModel<S>& model) {
  return detail::refs_impl<const S>(model);
}

/// Gradient tensors in the same order as param_refs; `grads` must hold a
/// gradient for every modality plus the head.
template <typename S>
std::vector<TensorRef<S>> grad_refs(const AggregationModel<S>& model, ModelGrads<S>& grads) {
  require(grads.vlad.size() == model.vlad.size(), "grad_refs: modality count mismatch");
  std::vector<TensorRef<S>> refs;
  const auto& cfg = model.config;
  for (std::size_t m = 0; m < grads.vlad.size(); ++m) {
    const std::string base = "vlad." + cfg.modalities[m].name + ".";
    auto& g = grads.vlad[m];
    const auto d = static_cast<std::uint64_t>(g.assign_weights.rows());
    const auto k = static_cast<std::uint64_t>(g.assign_weights.cols());
    refs.push_back(detail::ref_of<S>(base + "W", g.assign_weights, {d, k}));
    refs.push_back(detail::ref_of<S>(base + "b", g.assign_bias, {k}));
    refs.push_back(detail::ref_of<S>(base + "C", g.centers, {d, k}));
  }
  auto& h = grads.head;
  const auto md = static_cast<std::uint64_t>(h.fc_weight.rows());
  const auto hd = static_cast<std::uint64_t>(h.fc_weight.cols());
  const auto c = static_cast<std::uint64_t>(h.expert_bias.rows());
  const auto e = static_cast<std::uint64_t>(h.expert_bias.cols());
  refs.push_back(detail::ref_of<S>("head.fc.W", h.fc_weight, {md, hd}));
  refs.push_back(detail::ref_of<S>("head.fc.b", h.fc_bias, {hd}));
  refs.push_back(detail::ref_of<S>("head.moe.U", h.expert_weight, {c, e, hd}));
  refs.push_back(detail::ref_of<S>("head.moe.bias", h.expert_bias, {c, e}));
  refs.push_back(detail::ref_of<S>("head.moe.A", h.gate_weight, {c, e, hd}));
  refs.push_back(detail::ref_of<S>("head.cg.G", h.context_weight, {c, c}));
  refs.push_back(detail::ref_of<S>("head.cg.g", h.context_bias, {c}));
  return refs;
}

/// Adds `src` gradients into `dst` (same structure), in canonical order.
template <typename S>
void accumulate_grads(ModelGrads<S>& dst, const ModelGrads<S>& src) {
  require(dst.vlad.size() == src.vlad.size(), "accumulate_grads: structure mismatch");
  for (std::size_t m = 0; m < dst.vlad.size(); ++m) {
    dst.vlad[m].assign_weights += src.vlad[m].assign_weights;
    dst.vlad[m].assign_bias += src.vlad[m].assign_bias;
    dst.vlad[m].centers += src.vlad[m].centers;
  }
  dst.head.fc_weight += src.head.fc_weight;
  dst.head.fc_bias += src.head.fc_bias;
  dst.head.expert_weight += src.head.expert_weight;
  dst.head.expert_bias += src.head.expert_bias;
  dst.head.gate_weight += src.head.gate_weight;
  dst.head.context_weight += src.head.context_weight;
  dst.head.context_bias += src.head.context_bias;
}

template <typename S>
ModelGrads<S> zero_grads(const AggregationModel<S>& model) {
  ModelGrads<S> g;
  for (const auto& p : model.vlad) {
    VladGrads<S> vg;
    vg.assign_weights = Mat<S>::Zero(p.assign_weights.rows(), p.assign_weights.cols());
    vg.assign_bias = Vec<S>::Zero(p.assign_bias.size());
    vg.centers = Mat<S>::Zero(p.centers.rows(), p.centers.cols());
    g.vlad.push_back(std::move(vg));
  }
  const auto& h = model.head;
  g.head.fc_weight = Mat<S>::Zero(h.fc_weight.rows(), h.fc_weight.cols());
  g.head.fc_bias = Vec<S>::Zero(h.fc_bias.size());
  g.head.expert_weight = Mat<S>::Zero(h.expert_weight.rows(), h.expert_weight.cols());
  g.head.expert_bias = Mat<S>::Zero(h.expert_bias.rows(), h.expert_bias.cols());
  g.head.gate_weight = Mat<S>::Zero(h.gate_weight.rows(), h.gate_weight.cols());
  g.head.context_weight = Mat<S>::Zero(h.context_weight.rows(), h.context_weight.cols());
  g.head.context_bias = Vec<S>::Zero(h.context_bias.size());
  return g;
}

}  // namespace mmagg
