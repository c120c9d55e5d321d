#include "mmagg/eval.hpp"

#include "mmagg/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mmagg {

void PredictionSet::validate() const {
  require(num_classes >= 1, "prediction set: needs at least one class");
  require(class_names.empty() || static_cast<int>(class_names.size()) == num_classes,
          "prediction set: class name count mismatch");
  std::set<std::string> ids;
  for (const auto& p : predictions) {
    require(ids.insert(p.video_id).second,
            "prediction set: duplicate video id '" + p.video_id + "'");
    require(p.probs.size() == num_classes,
            "prediction set: wrong score count for video '" + p.video_id + "'");
    for (Eigen::Index c = 0; c < p.probs.size(); ++c)
      require(p.probs[c] >= 0.0 && p.probs[c] <= 1.0,
              "prediction set: score out of [0,1] for video '" + p.video_id + "'");
  }
  for (const auto& [id, labels] : ground_truth) {
    require(ids.count(id) == 1, "prediction set: ground truth for unscored video '" + id + "'");
    for (int c : labels)
      require(c >= 0 && c < num_classes, "prediction set: label out of range for '" + id + "'");
  }
}

double average_precision(const std::vector<std::pair<std::string, double>>& scores,
                         const std::set<std::string>& positives) {
  require(!positives.empty(), "average_precision: empty positive set");
  std::set<std::string> seen;
  for (const auto& [id, score] : scores) {
    require(seen.insert(id).second, "average_precision: duplicate video id '" + id + "'");
    require(std::isfinite(score), "average_precision: non-finite score for '" + id + "'");
  }
  for (const auto& id : positives)
    require(seen.count(id) == 1, "average_precision: positive '" + id + "' has no score");

  std::vector<std::pair<std::string, double>> ranked = scores;
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  double sum = 0.0;
  int hits = 0;
  for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
    if (positives.count(ranked[rank].first) == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(positives.size());
}

MapResult map_eval(const PredictionSet& preds, const std::vector<int>* subset) {
  preds.validate();
  std::vector<int> classes;
  if (subset != nullptr) {
    classes = *subset;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    for (int c : classes)
      require(c >= 0 && c < preds.num_classes, "map_eval: subset class index out of range");
  } else {
    for (int c = 0; c < preds.num_classes; ++c) classes.push_back(c);
  }

  MapResult result;
  double sum = 0.0;
  for (int c : classes) {
    std::set<std::string> positives;
    for (const auto& [id, labels] : preds.ground_truth)
      if (std::binary_search(labels.begin(), labels.end(), c)) positives.insert(id);
    if (positives.empty()) {
      result.excluded.push_back(c);
      continue;
    }
    std::vector<std::pair<std::string, double>> scores;
    scores.reserve(preds.predictions.size());
    for (const auto& p : preds.predictions) scores.emplace_back(p.video_id, p.probs[c]);
    ClassAp entry;
    entry.class_index = c;
    if (!preds.class_names.empty()) entry.class_name = preds.class_names[c];
    entry.ap = average_precision(scores, positives);
    entry.num_positives = static_cast<int>(positives.size());
    sum += entry.ap;
    result.per_class.push_back(std::move(entry));
  }
  require(!result.per_class.empty(), "map_eval: no class has a positive video");
  result.map = sum / static_cast<double>(result.per_class.size());
  return result;
}

PredictionSet ensemble_average(const std::vector<PredictionSet>& sets) {
  require(!sets.empty(), "ensemble_average: no prediction sets");
  PredictionSet out = sets.front();
  out.validate();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < out.predictions.size(); ++i)
    index[out.predictions[i].video_id] = i;

  for (std::size_t s = 1; s < sets.size(); ++s) {
    const PredictionSet& set = sets[s];
    set.validate();
    require(set.num_classes == out.num_classes, "ensemble_average: class count mismatch");
    require(set.predictions.size() == out.predictions.size(),
            "ensemble_average: video sets differ");
    for (const auto& p : set.predictions) {
      auto it = index.find(p.video_id);
      require(it != index.end(), "ensemble_average: video '" + p.video_id +
                                     "' is not present in every prediction set");
      out.predictions[it->second].probs += p.probs;
    }
  }
  const double inv = 1.0 / static_cast<double>(sets.size());
  for (auto& p : out.predictions) p.probs *= inv;
  return out;
}

double chance_map(const PredictionSet& like, int trials, std::uint64_t seed) {
  require(trials >= 1, "chance_map: trials must be >= 1");
  PredictionSet random_set = like;
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(hash_u64(seed, static_cast<std::uint64_t>(t)));
    for (auto& p : random_set.predictions)
      for (Eigen::Index c = 0; c < p.probs.size(); ++c) p.probs[c] = rng.next_double();
    sum += map_eval(random_set).map;
  }
  return sum / static_cast<double>(trials);
}

std::vector<int> resolve_subset(const Manifest& manifest, const std::string& name) {
  auto it = manifest.subsets.find(name);
  if (it != manifest.subsets.end()) return it->second;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  const std::string needle = lower(name);
  std::vector<int> classes;
  for (int c = 0; c < manifest.labels.num_classes(); ++c)
    if (lower(manifest.labels.names[c]).find(needle) != std::string::npos) classes.push_back(c);
  require(!classes.empty(), "subset '" + name + "' matches no class");
  return classes;
}

void write_predictions_csv(const PredictionSet& preds, const std::string& path) {
  preds.validate();
  std::ofstream os(path, std::ios::trunc);
  require(os.good(), "cannot open '" + path + "' for writing");
  os << "video_id,class_index,score\n";
  char buf[64];
  for (const auto& p : preds.predictions) {
    for (Eigen::Index c = 0; c < p.probs.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", p.probs[c]);
      os << p.video_id << ',' << c << ',' << buf << '\n';
    }
  }
  require(os.good(), "write failed for '" + path + "'");
}

PredictionSet read_predictions_csv(const std::string& path, const Manifest& manifest) {
  std::ifstream is(path);
  require(is.good(), "cannot open predictions file '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "'" + path + "': empty predictions file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "video_id,class_index,score",
          "'" + path + "': bad header '" + line + "'");

  const int classes = manifest.labels.num_classes();
  std::map<std::string, VecD> rows;
  std::map<std::string, std::vector<bool>> filled;
  std::vector<std::string> order;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, class_str, score_str;
    require(std::getline(ss, id, ',') && std::getline(ss, class_str, ',') &&
                std::getline(ss, score_str),
            "'" + path + "': malformed row at line " + std::to_string(line_no));
    int c = 0;
    double score = 0.0;
    try {
      c = std::stoi(class_str);
      score = std::stod(score_str);
    } catch (const std::exception&) {
      fail("'" + path + "': malformed row at line " + std::to_string(line_no));
    }
    require(c >= 0 && c < classes,
            "'" + path + "': class index out of range at line " + std::to_string(line_no));
    require(score >= 0.0 && score <= 1.0,
            "'" + path + "': score out of [0,1] at line " + std::to_string(line_no));
    auto it = rows.find(id);
    if (it == rows.end()) {
      manifest.video(id);  // rejects ids the manifest does not know
      it = rows.emplace(id, VecD::Zero(classes)).first;
      filled.emplace(id, std::vector<bool>(static_cast<std::size_t>(classes), false));
      order.push_back(id);
    }
    auto& mask = filled.at(id);
    require(!mask[static_cast<std::size_t>(c)],
            "'" + path + "': duplicate (video, class) row at line " + std::to_string(line_no));
    mask[static_cast<std::size_t>(c)] = true;
    it->second[c] = score;
  }
  for (const auto& [id, mask] : filled)
    for (bool seen : mask)
      require(seen, "'" + path + "': missing class scores for video '" + id + "'");

  std::vector<Prediction> predictions;
  predictions.reserve(order.size());
  for (const auto& id : order) predictions.push_back({id, rows.at(id)});
  return make_prediction_set(manifest, std::move(predictions));
}

void write_per_class_csv(const MapResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  require(os.good(), "cannot open '" + path + "' for writing");
  os << "class_index,class_name,ap,num_positives\n";
  char buf[64];
  for (const auto& entry : result.per_class) {
    std::snprintf(buf, sizeof(buf), "%.17g", entry.ap);
    os << entry.class_index << ',' << entry.class_name << ',' << buf << ','
       << entry.num_positives << '\n';
  }
  require(os.good(), "write failed for '" + path + "'");
}

PredictionSet make_prediction_set(const Manifest& manifest, std::vector<Prediction> predictions,
                                  bool require_labels) {
  PredictionSet set;
  set.num_classes = manifest.labels.num_classes();
  set.class_names = manifest.labels.names;
  set.subsets = manifest.subsets;
  set.predictions = std::move(predictions);
  for (const auto& p : set.predictions) {
    const VideoRecord& rec = manifest.video(p.video_id);
    if (require_labels)
      require(!rec.labels.empty(), "video '" + p.video_id + "' has no labels; cannot evaluate");
    if (!rec.labels.empty()) set.ground_truth[p.video_id] = rec.labels;
  }
  set.validate();
  return set;
}

}  // namespace mmagg
