#include "mmagg/trainer.hpp"

#include "mmagg/checkpoint.hpp"

#include <json.hpp>

#include <algorithm>
#include <optional>
#include <thread>

namespace mmagg {

namespace {

using ordered_json = nlohmann::ordered_json;

struct Example {
  std::size_t video = 0;
  int segment = 0;
};

VecF target_vector(const VideoRecord& record, int classes) {
  require(!record.labels.empty(), "video '" + record.id + "' has no labels for training");
  VecF t = VecF::Zero(classes);
  for (int label : record.labels) t[label] = 1.0f;
  return t;
}

struct ExampleResult {
  ModelGrads<float> grads;
  double loss = 0.0;
};

ExampleResult run_example(const AggregationModelF& model, const LoadedVideo& video,
                          const Segment& segment, const VecF& targets, std::uint64_t seed) {
  const SegmentSample sample = sample_segment(model.config, segment, video.features, seed);
  ModelCache<float> cache;
  const VecF y = model_forward(model, sample.inputs, &cache);
  ExampleResult result;
  result.loss = static_cast<double>(bce_loss(y, targets));
  const VecF grad_y = bce_loss_grad(y, targets);
  result.grads = model_backward(model, cache, grad_y);
  return result;
}

void check_params_finite(AggregationModelF& model) {
  for (const auto& ref : param_refs(model))
    for (std::size_t i = 0; i < ref.size; ++i)
      require(std::isfinite(static_cast<double>(ref.data[i])),
              "training produced a non-finite parameter in tensor " + ref.name);
}

}  // namespace

TrainLog train(AggregationModelF& model, AdamState<float>& optimizer, const Manifest& manifest,
               const TrainOptions& options) {
  model.config.validate();
  require(options.epochs >= 0, "train: epochs must be >= 0");
  require(options.batch_size >= 1, "train: batch size must be >= 1");
  const int threads = std::max(1, options.threads);

  const std::vector<LoadedVideo> dataset = load_dataset(manifest, model.config);
  std::vector<Example> examples;
  std::vector<VecF> targets;
  targets.reserve(dataset.size());
  for (std::size_t v = 0; v < dataset.size(); ++v) {
    targets.push_back(target_vector(dataset[v].record, model.config.classes));
    for (const auto& seg : dataset[v].segments)
      examples.push_back({v, seg.index});
  }
  require(!examples.empty(), "train: dataset has no segments");

  TrainLog log;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<Example> order = examples;
    Rng shuffle_rng(hash_u64(hash_u64(options.seed, 0x73687566ULL),
                             static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t batch = std::min<std::size_t>(options.batch_size, order.size() - start);
      std::vector<ExampleResult> results(batch);

      auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t b = lo; b < hi; ++b) {
          const Example& ex = order[start + b];
          const LoadedVideo& video = dataset[ex.video];
          const std::uint64_t seed = segment_seed(options.seed, video.record.id, ex.segment,
                                                  static_cast<std::uint64_t>(epoch));
          results[b] = run_example(model, video, video.segments[ex.segment], targets[ex.video],
                                   seed);
        }
      };
      if (threads == 1 || batch == 1) {
        run_range(0, batch);
      } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (batch + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
          const std::size_t lo = std::min(batch, t * chunk);
          const std::size_t hi = std::min(batch, lo + chunk);
          if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
      }

      // Fold in example order so results do not depend on the thread count.
      ModelGrads<float> total = zero_grads(model);
      for (std::size_t b = 0; b < batch; ++b) {
        accumulate_grads(total, results[b].grads);
        loss_sum += results[b].loss;
      }
      const float scale = 1.0f / static_cast<float>(batch);
      for (auto& ref : grad_refs(model, total))
        for (std::size_t i = 0; i < ref.size; ++i) ref.data[i] *= scale;

      if (!adam_step(optimizer, options.adam, param_refs(model), grad_refs(model, total)))
        ++log.skipped_steps;
    }
    check_params_finite(model);
    log.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return log;
}

GradCheckReport gradient_check(AggregationModelD& model, const std::vector<MatD>& inputs,
                               const VecD& targets, double step, double tolerance) {
  require(step > 0.0, "gradient_check: step must be positive");
  require(tolerance > 0.0, "gradient_check: tolerance must be positive");
  require(inputs.size() == model.vlad.size(), "gradient_check: modality count mismatch");

  auto loss_value = [&](const std::vector<MatD>& xs) {
    return bce_loss(model_forward(model, xs), targets);
  };

  ModelCache<double> cache;
  const VecD y = model_forward(model, inputs, &cache);
  ModelGrads<double> analytic = model_backward(model, cache, bce_loss_grad(y, targets));

  GradCheckReport report;
  auto compare = [&](const std::string& name, double got, double expected) {
    if (report.entries.empty() || report.entries.back().tensor != name)
      report.entries.push_back({name, 0.0, 0.0, true});
    auto& entry = report.entries.back();
    const double abs_err = std::abs(got - expected);
    const double rel = abs_err / std::max({std::abs(got), std::abs(expected), 1e-6});
    entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
    entry.max_rel_err = std::max(entry.max_rel_err, rel);
  };

  // Parameter tensors.
  std::vector<TensorRef<double>> params = param_refs(model);
  std::vector<TensorRef<double>> grads = grad_refs(model, analytic);
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size; ++i) {
      double& theta = params[t].data[i];
      const double orig = theta;
      theta = orig + step;
      const double plus = loss_value(inputs);
      theta = orig - step;
      const double minus = loss_value(inputs);
      theta = orig;
      compare(params[t].name, grads[t].data[i], (plus - minus) / (2.0 * step));
    }
  }

  // Input features.
  std::vector<MatD> xs = inputs;
  for (std::size_t m = 0; m < xs.size(); ++m) {
    const std::string name = "input." + model.config.modalities[m].name;
    for (Eigen::Index i = 0; i < xs[m].rows(); ++i) {
      for (Eigen::Index j = 0; j < xs[m].cols(); ++j) {
        const double orig = xs[m](i, j);
        xs[m](i, j) = orig + step;
        const double plus = loss_value(xs);
        xs[m](i, j) = orig - step;
        const double minus = loss_value(xs);
        xs[m](i, j) = orig;
        compare(name, analytic.vlad[m].frames(i, j), (plus - minus) / (2.0 * step));
      }
    }
  }

  report.ok = true;
  for (auto& entry : report.entries) {
    entry.ok = entry.max_rel_err < tolerance;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.ok = report.ok && entry.ok;
  }
  return report;
}

namespace {

ordered_json config_to_json(const ModelConfig& config) {
  ordered_json j;
  j["modalities"] = ordered_json::array();
  for (const auto& m : config.modalities) {
    ordered_json jm;
    jm["name"] = m.name;
    jm["dim"] = m.dim;
    jm["fps"] = m.fps;
    jm["clusters"] = m.clusters;
    j["modalities"].push_back(std::move(jm));
  }
  j["classes"] = config.classes;
  j["hidden"] = config.hidden;
  j["experts"] = config.experts;
  j["sample_size"] = config.sample_size;
  j["seed"] = config.seed;
  return j;
}

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig config;
  for (const auto& jm : j.at("modalities")) {
    ModalitySpec spec;
    spec.name = jm.at("name").get<std::string>();
    spec.dim = jm.at("dim").get<int>();
    spec.fps = jm.at("fps").get<double>();
    spec.clusters = jm.at("clusters").get<int>();
    config.modalities.push_back(std::move(spec));
  }
  config.classes = j.at("classes").get<int>();
  config.hidden = j.at("hidden").get<int>();
  config.experts = j.at("experts").get<int>();
  config.sample_size = j.at("sample_size").get<int>();
  config.seed = j.at("seed").get<std::uint64_t>();
  config.validate();
  return config;
}

}  // namespace

void save_model(const AggregationModelF& model, const std::string& path,
                const AdamState<float>* optimizer) {
  TensorTable table;
  const std::string config_str = config_to_json(model.config).dump();
  table.add(Tensor::from_bytes("meta.config",
                               std::vector<std::uint8_t>(config_str.begin(), config_str.end())));
  const auto params = param_refs(model);
  for (const auto& ref : params)
    table.add(Tensor::from_f32(ref.name, ref.dims,
                               std::vector<float>(ref.data, ref.data + ref.size)));
  if (optimizer != nullptr && optimizer->initialized()) {
    require(optimizer->first.size() == params.size(), "save_model: optimizer/param mismatch");
    table.add(Tensor::scalar_f64("adam.step", static_cast<double>(optimizer->step)));
    for (std::size_t t = 0; t < params.size(); ++t) {
      table.add(
          Tensor::from_f32("adam.m." + params[t].name, params[t].dims, optimizer->first[t]));
      table.add(
          Tensor::from_f32("adam.v." + params[t].name, params[t].dims, optimizer->second[t]));
    }
  }
  write_tensor_table(table, path);
}

AggregationModelF load_model(const std::string& path, AdamState<float>* optimizer) {
  const TensorTable table = read_tensor_table(path);
  const Tensor& meta = table.get("meta.config");
  ordered_json j;
  try {
    j = ordered_json::parse(std::string(meta.u8.begin(), meta.u8.end()));
  } catch (const nlohmann::json::exception& e) {
    fail("checkpoint '" + path + "': bad config blob: " + std::string(e.what()));
  }

  AggregationModelF model = init_model<float>(config_from_json(j));
  for (auto& ref : param_refs(model)) {
    const Tensor& t = table.get(ref.name);
    require(t.dims == ref.dims, "checkpoint '" + path + "': shape mismatch for " + ref.name);
    std::copy(t.f32.begin(), t.f32.end(), ref.data);
  }
  if (optimizer != nullptr) {
    const Tensor* step = table.find("adam.step");
    if (step != nullptr) {
      optimizer->init_like(param_refs(model));
      optimizer->step = static_cast<std::uint64_t>(step->f64.at(0));
      std::size_t t = 0;
      for (const auto& ref : param_refs(model)) {
        const Tensor& m = table.get("adam.m." + ref.name);
        const Tensor& v = table.get("adam.v." + ref.name);
        require(m.f32.size() == ref.size && v.f32.size() == ref.size,
                "checkpoint '" + path + "': optimizer shape mismatch for " + ref.name);
        optimizer->first[t] = m.f32;
        optimizer->second[t] = v.f32;
        ++t;
      }
    } else {
      *optimizer = AdamState<float>{};
    }
  }
  return model;
}

}  // namespace mmagg
