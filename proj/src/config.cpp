#include "mmagg/config.hpp"

#include <json.hpp>

#include <fstream>

namespace mmagg {

using json = nlohmann::json;

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open config '" + path + "'");
  json root;
  try {
    root = json::parse(is);
  } catch (const json::exception& e) {
    fail("config '" + path + "': parse failure: " + std::string(e.what()));
  }

  RunConfig c;
  c.sample_size = root.value("sample_size", c.sample_size);
  c.repeats = root.value("repeats", c.repeats);
  c.seed = root.value("seed", c.seed);
  c.hidden = root.value("hidden", c.hidden);
  c.experts = root.value("experts", c.experts);
  c.classes = root.value("classes", c.classes);
  c.batch_size = root.value("batch_size", c.batch_size);
  c.epochs = root.value("epochs", c.epochs);
  c.threads = root.value("threads", c.threads);
  c.pca_sample_cap = root.value("pca_sample_cap", c.pca_sample_cap);
  c.whiten_eps = root.value("whiten_eps", c.whiten_eps);
  c.clip_bound = root.value("clip_bound", c.clip_bound);
  c.fd_step = root.value("fd_step", c.fd_step);
  c.fd_tolerance = root.value("fd_tolerance", c.fd_tolerance);
  if (root.contains("optimizer")) {
    const auto& jo = root.at("optimizer");
    c.adam.lr = jo.value("lr", c.adam.lr);
    c.adam.beta1 = jo.value("beta1", c.adam.beta1);
    c.adam.beta2 = jo.value("beta2", c.adam.beta2);
    c.adam.eps = jo.value("eps", c.adam.eps);
  }
  if (root.contains("modalities")) {
    for (const auto& jm : root.at("modalities")) {
      ModalitySpec spec;
      spec.name = jm.at("name").get<std::string>();
      spec.dim = jm.at("dim").get<int>();
      spec.fps = jm.value("fps", 1.0);
      spec.clusters = jm.at("clusters").get<int>();
      c.modalities.push_back(std::move(spec));
    }
  }
  if (root.contains("pca_dims")) {
    for (const auto& [name, jd] : root.at("pca_dims").items()) c.pca_dims[name] = jd.get<int>();
  }
  require(c.sample_size >= 1, "config: sample_size must be >= 1");
  require(c.repeats >= 1, "config: repeats must be >= 1");
  require(c.hidden >= 1, "config: hidden must be >= 1");
  require(c.experts >= 1, "config: experts must be >= 1");
  require(c.batch_size >= 1, "config: batch_size must be >= 1");
  require(c.epochs >= 0, "config: epochs must be >= 0");
  require(c.threads >= 1, "config: threads must be >= 1");
  return c;
}

ModelConfig make_model_config(const RunConfig& config, const Manifest* manifest) {
  ModelConfig model;
  model.hidden = config.hidden;
  model.experts = config.experts;
  model.sample_size = config.sample_size;
  model.seed = config.seed;
  if (manifest != nullptr) {
    model.modalities = manifest->modalities;
    model.classes = manifest->labels.num_classes();
    for (const auto& spec : config.modalities) {
      const ModalitySpec& ms = manifest->modality(spec.name);
      require(ms.dim == spec.dim && ms.clusters == spec.clusters,
              "config modality '" + spec.name + "' disagrees with the manifest");
    }
  } else {
    require(!config.modalities.empty(), "config: modalities are required without a manifest");
    require(config.classes >= 1, "config: classes is required without a manifest");
    model.modalities = config.modalities;
    model.classes = config.classes;
  }
  model.validate();
  return model;
}

}  // namespace mmagg
