#include "mmagg/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

namespace mmagg {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const ModalitySpec* Manifest::find_modality(const std::string& name) const {
  for (const auto& m : modalities)
    if (m.name == name) return &m;
  return nullptr;
}

const ModalitySpec& Manifest::modality(const std::string& name) const {
  const ModalitySpec* m = find_modality(name);
  if (m == nullptr) fail("manifest: unknown modality '" + name + "'");
  return *m;
}

const VideoRecord& Manifest::video(const std::string& id) const {
  for (const auto& v : videos)
    if (v.id == id) return v;
  fail("manifest: unknown video '" + id + "'");
}

std::string Manifest::resolve_path(const std::string& feature_path) const {
  const fs::path p(feature_path);
  if (p.is_absolute() || base_dir.empty()) return feature_path;
  return (fs::path(base_dir) / p).string();
}

Manifest Manifest::restricted_to(const std::vector<std::string>& modality_names) const {
  Manifest out;
  out.labels = labels;
  out.subsets = subsets;
  out.base_dir = base_dir;
  for (const auto& name : modality_names) out.modalities.push_back(modality(name));
  for (const auto& v : videos) {
    VideoRecord r;
    r.id = v.id;
    r.duration_s = v.duration_s;
    r.labels = v.labels;
    for (const auto& name : modality_names) {
      auto it = v.features.find(name);
      if (it != v.features.end()) r.features[name] = it->second;
    }
    out.videos.push_back(std::move(r));
  }
  out.validate();
  return out;
}

void Manifest::validate() const {
  require(labels.num_classes() >= 1, "manifest: needs at least one class");
  std::set<std::string> modality_names;
  for (const auto& m : modalities) {
    require(!m.name.empty(), "manifest: empty modality name");
    require(modality_names.insert(m.name).second,
            "manifest: duplicate modality name '" + m.name + "'");
    require(m.dim >= 1, "manifest: modality '" + m.name + "' dim must be >= 1");
    require(m.clusters >= 1, "manifest: modality '" + m.name + "' clusters must be >= 1");
    require(m.fps > 0.0, "manifest: modality '" + m.name + "' fps must be positive");
  }
  std::set<std::string> video_ids;
  for (const auto& v : videos) {
    require(!v.id.empty(), "manifest: empty video id");
    require(video_ids.insert(v.id).second, "manifest: duplicate video id '" + v.id + "'");
    require(v.duration_s > 0.0, "manifest: video '" + v.id + "' duration must be positive");
    for (std::size_t i = 0; i < v.labels.size(); ++i) {
      require(v.labels[i] >= 0 && v.labels[i] < labels.num_classes(),
              "manifest: video '" + v.id + "' label index out of range");
      require(i == 0 || v.labels[i] > v.labels[i - 1],
              "manifest: video '" + v.id + "' labels must be unique");
    }
    for (const auto& [name, path] : v.features) {
      require(find_modality(name) != nullptr,
              "manifest: video '" + v.id + "' references unknown modality '" + name + "'");
      require(!path.empty(), "manifest: video '" + v.id + "' has empty feature path");
    }
  }
  for (const auto& [name, classes] : subsets) {
    require(!classes.empty(), "manifest: subset '" + name + "' is empty");
    for (int c : classes)
      require(c >= 0 && c < labels.num_classes(),
              "manifest: subset '" + name + "' class index out of range");
  }
}

namespace {

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) fail("manifest: missing field '" + key + "' in " + ctx);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail("manifest: bad field '" + key + "' in " + ctx + ": " + e.what());
  }
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open manifest '" + path + "'");
  json root;
  try {
    root = json::parse(is);
  } catch (const json::exception& e) {
    fail("manifest '" + path + "': parse failure: " + std::string(e.what()));
  }
  require(root.is_object(), "manifest '" + path + "': top level must be an object");

  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();

  const auto num_classes = get_field<std::int64_t>(root, "num_classes", "manifest");
  for (const auto& jm : get_field<json>(root, "modalities", "manifest")) {
    ModalitySpec spec;
    spec.name = get_field<std::string>(jm, "name", "modalities");
    spec.dim = get_field<int>(jm, "dim", "modality '" + spec.name + "'");
    spec.fps = get_field<double>(jm, "fps", "modality '" + spec.name + "'");
    spec.clusters = get_field<int>(jm, "clusters", "modality '" + spec.name + "'");
    m.modalities.push_back(std::move(spec));
  }
  for (const auto& jv : get_field<json>(root, "videos", "manifest")) {
    VideoRecord rec;
    rec.id = get_field<std::string>(jv, "id", "videos");
    rec.duration_s = get_field<double>(jv, "duration_s", "video '" + rec.id + "'");
    rec.labels = get_field<std::vector<int>>(jv, "labels", "video '" + rec.id + "'");
    std::sort(rec.labels.begin(), rec.labels.end());
    for (const auto& [name, jpath] : get_field<json>(jv, "features", "video '" + rec.id + "'").items())
      rec.features[name] = jpath.get<std::string>();
    m.videos.push_back(std::move(rec));
  }
  m.labels.names = get_field<std::vector<std::string>>(root, "labels", "manifest");
  require(static_cast<std::int64_t>(m.labels.names.size()) == num_classes,
          "manifest '" + path + "': num_classes does not match the label list length");
  if (root.contains("subsets")) {
    for (const auto& [name, jclasses] : root.at("subsets").items())
      m.subsets[name] = jclasses.get<std::vector<int>>();
  }
  m.validate();
  return m;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  manifest.validate();
  ordered_json root;
  root["num_classes"] = manifest.labels.num_classes();
  root["modalities"] = ordered_json::array();
  for (const auto& m : manifest.modalities) {
    ordered_json jm;
    jm["name"] = m.name;
    jm["dim"] = m.dim;
    jm["fps"] = m.fps;
    jm["clusters"] = m.clusters;
    root["modalities"].push_back(std::move(jm));
  }
  root["videos"] = ordered_json::array();
  for (const auto& v : manifest.videos) {
    ordered_json jv;
    jv["id"] = v.id;
    jv["duration_s"] = v.duration_s;
    jv["labels"] = v.labels;
    jv["features"] = ordered_json::object();
    for (const auto& [name, fpath] : v.features) jv["features"][name] = fpath;
    root["videos"].push_back(std::move(jv));
  }
  root["labels"] = manifest.labels.names;
  if (!manifest.subsets.empty()) {
    root["subsets"] = ordered_json::object();
    for (const auto& [name, classes] : manifest.subsets) root["subsets"][name] = classes;
  }
  std::ofstream os(path, std::ios::trunc);
  require(os.good(), "cannot open '" + path + "' for writing");
  os << root.dump(2) << "\n";
  require(os.good(), "write failed for '" + path + "'");
}

std::map<std::string, FeatureSequence> load_video_features(const Manifest& manifest,
                                                           const VideoRecord& record) {
  std::map<std::string, FeatureSequence> out;
  for (const auto& [name, fpath] : record.features) {
    const ModalitySpec& spec = manifest.modality(name);
    FeatureSequence seq = read_features(manifest.resolve_path(fpath));
    seq.modality = name;
    require(seq.dim() == spec.dim, "video '" + record.id + "' modality '" + name +
                                       "': feature dim " + std::to_string(seq.dim()) +
                                       " does not match manifest dim " + std::to_string(spec.dim));
    require(seq.fps == spec.fps,
            "video '" + record.id + "' modality '" + name + "': fps mismatch with manifest");
    out[name] = std::move(seq);
  }
  return out;
}

}  // namespace mmagg
