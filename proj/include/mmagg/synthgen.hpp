#pragma once

#include "mmagg/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmagg {

struct SynthModality {
  std::string name;
  int dim = 8;
  double fps = 1.0;
  int clusters = 4;
  std::vector<int> informative_classes;  // classes this modality encodes; empty = pure noise
  bool temporal = false;  // temporal-pattern mode: window-aggregated motif view
};

/// Deterministic synthetic multi-modal dataset description. Informative
/// modalities carry an additive class signature on a random subset of
/// frames; with the temporal-pattern flag the class is encoded only in the
/// order of a motif of shared symbols, visible to window-aggregated
/// (temporal) modalities but not to per-frame (control) ones.
struct SynthSpec {
  int num_classes = 2;
  int videos_per_class = 10;
  int val_videos_per_class = 0;
  double duration_s = 60.0;
  double noise_scale = 1.0;
  double signal_scale = 1.0;
  double signal_fraction = 0.2;
  bool temporal_pattern = false;
  bool solvable = false;  // when set, every class must be covered by a modality
  std::uint64_t seed = 42;
  std::vector<SynthModality> modalities;

  void validate() const;
};

struct SynthOutput {
  std::string train_manifest;
  std::string val_manifest;  // empty when no validation split was requested
};

SynthSpec load_synth_spec(const std::string& path);

/// Writes feature files plus manifest(s) under out_dir. Byte-identical for
/// identical (spec, out_dir).
SynthOutput generate(const SynthSpec& spec, const std::string& out_dir);

}  // namespace mmagg
