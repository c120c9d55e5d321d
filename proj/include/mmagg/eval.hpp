#pragma once

#include "mmagg/common.hpp"
#include "mmagg/manifest.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mmagg {

struct Prediction {
  std::string video_id;
  VecD probs;  // per-class scores in [0, 1]
};

struct PredictionSet {
  int num_classes = 0;
  std::vector<std::string> class_names;  // optional, sized num_classes when present
  std::vector<Prediction> predictions;   // unique video ids
  std::map<std::string, std::vector<int>> ground_truth;  // video id -> sorted labels
  std::map<std::string, std::vector<int>> subsets;       // named class masks

  void validate() const;
};

/// Non-interpolated average precision. Ranking is by descending score with
/// ties broken by ascending video id.
double average_precision(const std::vector<std::pair<std::string, double>>& scores,
                         const std::set<std::string>& positives);

struct ClassAp {
  int class_index = 0;
  std::string class_name;
  double ap = 0.0;
  int num_positives = 0;
};

struct MapResult {
  double map = 0.0;
  std::vector<ClassAp> per_class;   // evaluated classes, ascending index
  std::vector<int> excluded;        // classes without positives
};

/// Mean AP over classes with at least one positive; classes without
/// positives are excluded from the mean and listed. `subset` restricts the
/// evaluated classes.
MapResult map_eval(const PredictionSet& preds, const std::vector<int>* subset = nullptr);

/// Per-video, per-class arithmetic mean over prediction sets with identical
/// video ids and class counts.
PredictionSet ensemble_average(const std::vector<PredictionSet>& sets);

/// Empirical chance level: mean mAP of uniform-random scores on the same
/// videos and ground truth.
double chance_map(const PredictionSet& like, int trials, std::uint64_t seed);

/// Resolves a named class subset: manifest `subsets` entry if present,
/// otherwise case-insensitive substring match over class names.
std::vector<int> resolve_subset(const Manifest& manifest, const std::string& name);

// Predictions CSV: header "video_id,class_index,score", one row per
// (video, class).
void write_predictions_csv(const PredictionSet& preds, const std::string& path);
PredictionSet read_predictions_csv(const std::string& path, const Manifest& manifest);

void write_per_class_csv(const MapResult& result, const std::string& path);

/// Ground truth and names pulled from a manifest for a set of model outputs.
/// Evaluation paths require every scored video to carry labels; prediction
/// output does not.
PredictionSet make_prediction_set(const Manifest& manifest, std::vector<Prediction> predictions,
                                  bool require_labels = true);

}  // namespace mmagg
