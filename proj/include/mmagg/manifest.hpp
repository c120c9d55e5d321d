#pragma once

#include "mmagg/common.hpp"
#include "mmagg/feature_io.hpp"

#include <map>
#include <string>
#include <vector>

namespace mmagg {

/// Per-modality metadata: identity, post-PCA dimension, feature rate and
/// VLAD cluster count.
struct ModalitySpec {
  std::string name;
  int dim = 0;
  double fps = 0.0;
  int clusters = 0;
};

struct VideoRecord {
  std::string id;
  double duration_s = 0.0;
  std::vector<int> labels;                      // sorted, unique class indices
  std::map<std::string, std::string> features;  // modality name -> feature-file path
};

struct LabelVocabulary {
  std::vector<std::string> names;  // position = class index

  int num_classes() const { return static_cast<int>(names.size()); }
};

struct Manifest {
  std::vector<ModalitySpec> modalities;  // order fixes the concatenation order downstream
  std::vector<VideoRecord> videos;
  LabelVocabulary labels;
  std::map<std::string, std::vector<int>> subsets;  // optional named class subsets
  std::string base_dir;  // directory of the manifest file; feature paths resolve against it

  const ModalitySpec* find_modality(const std::string& name) const;
  const ModalitySpec& modality(const std::string& name) const;
  const VideoRecord& video(const std::string& id) const;
  std::string resolve_path(const std::string& feature_path) const;

  /// Copy with only the named modalities (specs and per-video feature maps).
  Manifest restricted_to(const std::vector<std::string>& modality_names) const;

  void validate() const;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

/// Loads every feature sequence a record references, validating dim and fps
/// against the manifest's modality specs.
std::map<std::string, FeatureSequence> load_video_features(const Manifest& manifest,
                                                           const VideoRecord& record);

}  // namespace mmagg
