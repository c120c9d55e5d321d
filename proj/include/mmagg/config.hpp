#pragma once

#include "mmagg/manifest.hpp"
#include "mmagg/model.hpp"
#include "mmagg/trainer.hpp"

#include <map>
#include <optional>
#include <string>

namespace mmagg {

/// Shared run configuration for the CLI. Every field has a default; flags
/// override file values.
struct RunConfig {
  int sample_size = 50;
  int repeats = 5;
  std::uint64_t seed = 42;
  int hidden = 1024;
  int experts = 2;
  int classes = 0;  // only needed when no manifest provides it (gradcheck)
  AdamConfig adam;
  int batch_size = 64;
  int epochs = 5;
  int threads = 1;
  std::vector<ModalitySpec> modalities;  // optional; must agree with the manifest
  std::map<std::string, int> pca_dims;   // fit-preprocess targets per modality
  int pca_sample_cap = 100000;
  double whiten_eps = 1e-6;
  double clip_bound = 2.5;
  double fd_step = 1e-5;
  double fd_tolerance = 1e-4;
};

RunConfig load_run_config(const std::string& path);

/// Model architecture from config plus manifest. Modality identity and
/// order come from the manifest; a config modality list, when present, must
/// match. Without a manifest the config's own modality list and class count
/// are used.
ModelConfig make_model_config(const RunConfig& config, const Manifest* manifest);

}  // namespace mmagg
