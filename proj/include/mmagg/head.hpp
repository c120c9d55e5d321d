#pragma once

#include "mmagg/common.hpp"

#include <cmath>

namespace mmagg {

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

/// Post-aggregation classifier: fully connected layer with relu, per-class
/// mixture of sigmoid experts with softmax gates, and a context gate applied
/// to the class-probability vector.
template <typename S>
struct HeadParams {
  Mat<S> fc_weight;     // M x H
  Vec<S> fc_bias;       // H
  Mat<S> expert_weight; // (C*E) x H, row c*E+e
  Mat<S> expert_bias;   // C x E
  Mat<S> gate_weight;   // (C*E) x H, row c*E+e
  Mat<S> context_weight;  // C x C
  Vec<S> context_bias;    // C
  int experts = 0;

  Eigen::Index input_dim() const { return fc_weight.rows(); }
  Eigen::Index hidden_dim() const { return fc_weight.cols(); }
  Eigen::Index classes() const { return context_weight.rows(); }

  void check_shapes() const {
    const Eigen::Index c = classes();
    const Eigen::Index h = hidden_dim();
    require(experts >= 1, "head params: expert count must be >= 1");
    require(fc_bias.size() == h, "head params: fc bias size mismatch");
    require(expert_weight.rows() == c * experts && expert_weight.cols() == h,
            "head params: expert weight shape mismatch");
    require(expert_bias.rows() == c && expert_bias.cols() == experts,
            "head params: expert bias shape mismatch");
    require(gate_weight.rows() == c * experts && gate_weight.cols() == h,
            "head params: gate weight shape mismatch");
    require(context_weight.cols() == c, "head params: context weight must be square");
    require(context_bias.size() == c, "head params: context bias size mismatch");
  }
};

template <typename S>
struct HeadCache {
  Vec<S> input;       // M
  Vec<S> hidden_pre;  // H
  Vec<S> hidden;      // H
  Mat<S> gate;        // C x E, rows sum to 1
  Mat<S> expert_out;  // C x E, sigmoid outputs
  Vec<S> mixture;     // C, p
  Vec<S> context;     // C, sigmoid(G p + g)
  Vec<S> output;      // C, y = context .* mixture
};

template <typename S>
Vec<S> head_forward(const HeadParams<S>& params, const Vec<S>& input,
                    HeadCache<S>* cache = nullptr) {
  params.check_shapes();
  require(input.size() == params.input_dim(), "head_forward: input size mismatch");
  const Eigen::Index c = params.classes();
  const int e_count = params.experts;

  HeadCache<S> local;
  HeadCache<S>& k = cache != nullptr ? *cache : local;
  k.input = input;
  k.hidden_pre = params.fc_weight.transpose() * input + params.fc_bias;
  k.hidden = k.hidden_pre.cwiseMax(S(0));

  k.gate.resize(c, e_count);
  k.expert_out.resize(c, e_count);
  k.mixture.resize(c);
  for (Eigen::Index cc = 0; cc < c; ++cc) {
    Vec<S> logits(e_count);
    for (int e = 0; e < e_count; ++e) {
      const Eigen::Index row = cc * e_count + e;
      logits[e] = params.gate_weight.row(row).dot(k.hidden);
      k.expert_out(cc, e) =
          sigmoid(params.expert_weight.row(row).dot(k.hidden) + params.expert_bias(cc, e));
    }
    const S max_logit = logits.maxCoeff();
    Vec<S> exps = (logits.array() - max_logit).exp();
    k.gate.row(cc) = (exps / exps.sum()).transpose();
    k.mixture[cc] = k.gate.row(cc).dot(k.expert_out.row(cc));
  }

  const Vec<S> pre_gate = params.context_weight * k.mixture + params.context_bias;
  k.context.resize(c);
  for (Eigen::Index cc = 0; cc < c; ++cc) k.context[cc] = sigmoid(pre_gate[cc]);
  k.output = k.context.cwiseProduct(k.mixture);
  return k.output;
}

template <typename S>
struct HeadGrads {
  Mat<S> fc_weight;
  Vec<S> fc_bias;
  Mat<S> expert_weight;
  Mat<S> expert_bias;
  Mat<S> gate_weight;
  Mat<S> context_weight;
  Vec<S> context_bias;
  Vec<S> input;  // M
};

template <typename S>
HeadGrads<S> head_backward(const HeadParams<S>& params, const HeadCache<S>& cache,
                           const Vec<S>& grad_output) {
  const Eigen::Index c = params.classes();
  const int e_count = params.experts;
  require(grad_output.size() == c, "head_backward: gradient size mismatch");

  HeadGrads<S> g;

  // y = context .* mixture; context = sigmoid(G * mixture + g).
  const Vec<S> g_context = grad_output.cwiseProduct(cache.mixture);
  Vec<S> g_mixture = grad_output.cwiseProduct(cache.context);
  const Vec<S> g_pre_gate =
      g_context.array() * cache.context.array() * (S(1) - cache.context.array());
  g.context_weight = g_pre_gate * cache.mixture.transpose();
  g.context_bias = g_pre_gate;
  g_mixture += params.context_weight.transpose() * g_pre_gate;

  g.expert_weight = Mat<S>::Zero(c * e_count, params.hidden_dim());
  g.expert_bias = Mat<S>::Zero(c, e_count);
  g.gate_weight = Mat<S>::Zero(c * e_count, params.hidden_dim());
  Vec<S> g_hidden = Vec<S>::Zero(params.hidden_dim());
  for (Eigen::Index cc = 0; cc < c; ++cc) {
    // Experts: p_c = sum_e gate * sigmoid(u), u = U.h + bias.
    S gate_dot = S(0);
    for (int e = 0; e < e_count; ++e)
      gate_dot += g_mixture[cc] * cache.expert_out(cc, e) * cache.gate(cc, e);
    for (int e = 0; e < e_count; ++e) {
      const Eigen::Index row = cc * e_count + e;
      const S out = cache.expert_out(cc, e);
      const S g_u = g_mixture[cc] * cache.gate(cc, e) * out * (S(1) - out);
      g.expert_weight.row(row) = g_u * cache.hidden.transpose();
      g.expert_bias(cc, e) = g_u;
      g_hidden += g_u * params.expert_weight.row(row).transpose();

      // Gate softmax backward.
      const S g_gate_logit = cache.gate(cc, e) * (g_mixture[cc] * out - gate_dot);
      g.gate_weight.row(row) = g_gate_logit * cache.hidden.transpose();
      g_hidden += g_gate_logit * params.gate_weight.row(row).transpose();
    }
  }

  Vec<S> g_hidden_pre(params.hidden_dim());
  for (Eigen::Index j = 0; j < params.hidden_dim(); ++j)
    g_hidden_pre[j] = cache.hidden_pre[j] > S(0) ? g_hidden[j] : S(0);

  g.fc_weight = cache.input * g_hidden_pre.transpose();
  g.fc_bias = g_hidden_pre;
  g.input = params.fc_weight * g_hidden_pre;
  return g;
}

// Mean binary cross-entropy over classes; outputs are clamped into
// [1e-7, 1 - 1e-7] for the loss only.
inline constexpr double kProbClampLo = 1e-7;

template <typename S>
S bce_loss(const Vec<S>& output, const Vec<S>& targets) {
  require(output.size() == targets.size(), "bce_loss: size mismatch");
  require(output.size() >= 1, "bce_loss: empty output");
  const S lo = S(kProbClampLo);
  const S hi = S(1) - S(kProbClampLo);
  S total = S(0);
  for (Eigen::Index i = 0; i < output.size(); ++i) {
    const S y = std::clamp(output[i], lo, hi);
    total += targets[i] * std::log(y) + (S(1) - targets[i]) * std::log(S(1) - y);
  }
  return -total / static_cast<S>(output.size());
}

template <typename S>
Vec<S> bce_loss_grad(const Vec<S>& output, const Vec<S>& targets) {
  require(output.size() == targets.size(), "bce_loss_grad: size mismatch");
  const S lo = S(kProbClampLo);
  const S hi = S(1) - S(kProbClampLo);
  const S inv_c = S(1) / static_cast<S>(output.size());
  Vec<S> grad = Vec<S>::Zero(output.size());
  for (Eigen::Index i = 0; i < output.size(); ++i) {
    // Zero outside the clamp range: the clamped value is constant there.
    if (output[i] < lo || output[i] > hi) continue;
    grad[i] = -inv_c * (targets[i] / output[i] - (S(1) - targets[i]) / (S(1) - output[i]));
  }
  return grad;
}

}  // namespace mmagg
