#include "mmagg/synthgen.hpp"

#include "mmagg/feature_io.hpp"
#include "mmagg/manifest.hpp"
#include "mmagg/rng.hpp"
#include "mmagg/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace mmagg {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kSymbolCount = 8;   // shared symbol vocabulary in temporal mode
constexpr int kMotifLength = 3;   // symbols per motif / frames per window
constexpr std::array<std::array<int, 3>, 6> kMotifOrders = {{
    {0, 1, 2}, {2, 1, 0}, {1, 2, 0}, {0, 2, 1}, {2, 0, 1}, {1, 0, 2},
}};
// Position weights that make the ordered window content distinguishable.
constexpr std::array<double, 3> kWindowWeights = {0.25, 0.5, 1.0};

std::string class_name(int c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "class_%03d", c);
  return buf;
}

std::string video_id(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05d", prefix, index);
  return buf;
}

MatF draw_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  MatF m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<float>(rng.next_normal() * scale);
  return m;
}

struct ClassSignal {
  // Non-temporal mode: one signature row per class (zero when the modality
  // does not encode the class). Temporal mode: one embedding row per symbol.
  MatF vectors;
};

}  // namespace

void SynthSpec::validate() const {
  require(num_classes >= 1, "synth spec: num_classes must be >= 1");
  require(videos_per_class >= 1, "synth spec: videos_per_class must be >= 1");
  require(val_videos_per_class >= 0, "synth spec: val_videos_per_class must be >= 0");
  require(duration_s > 0.0, "synth spec: duration_s must be positive");
  require(noise_scale >= 0.0, "synth spec: noise_scale must be >= 0");
  require(signal_scale > 0.0, "synth spec: signal_scale must be positive");
  require(signal_fraction > 0.0 && signal_fraction <= 1.0,
          "synth spec: signal_fraction must be in (0, 1]");
  require(!modalities.empty(), "synth spec: needs at least one modality");
  std::set<std::string> names;
  for (const auto& m : modalities) {
    require(names.insert(m.name).second, "synth spec: duplicate modality '" + m.name + "'");
    require(m.dim >= 1 && m.clusters >= 1 && m.fps > 0.0,
            "synth spec: bad dims for modality '" + m.name + "'");
    require(!m.temporal || temporal_pattern,
            "synth spec: temporal modality requires temporal_pattern");
    for (int c : m.informative_classes)
      require(c >= 0 && c < num_classes,
              "synth spec: informative class out of range for '" + m.name + "'");
  }
  if (temporal_pattern)
    require(num_classes <= static_cast<int>(kMotifOrders.size()),
            "synth spec: temporal_pattern supports at most 6 classes");
  if (solvable) {
    for (int c = 0; c < num_classes; ++c) {
      bool covered = false;
      for (const auto& m : modalities) {
        if (m.temporal || std::count(m.informative_classes.begin(),
                                     m.informative_classes.end(), c) > 0)
          covered = true;
      }
      require(covered, "synth spec: class " + std::to_string(c) +
                           " has no informative modality but solvable is set");
    }
  }
}

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open synth spec '" + path + "'");
  json root;
  try {
    root = json::parse(is);
  } catch (const json::exception& e) {
    fail("synth spec '" + path + "': parse failure: " + std::string(e.what()));
  }

  SynthSpec spec;
  spec.num_classes = root.value("num_classes", spec.num_classes);
  spec.videos_per_class = root.value("videos_per_class", spec.videos_per_class);
  spec.val_videos_per_class = root.value("val_videos_per_class", spec.val_videos_per_class);
  spec.duration_s = root.value("duration_s", spec.duration_s);
  spec.noise_scale = root.value("noise_scale", spec.noise_scale);
  spec.signal_scale = root.value("signal_scale", spec.signal_scale);
  spec.signal_fraction = root.value("signal_fraction", spec.signal_fraction);
  spec.temporal_pattern = root.value("temporal_pattern", spec.temporal_pattern);
  spec.solvable = root.value("solvable", spec.solvable);
  spec.seed = root.value("seed", spec.seed);
  require(root.contains("modalities"), "synth spec '" + path + "': missing modalities");
  for (const auto& jm : root.at("modalities")) {
    SynthModality m;
    m.name = jm.at("name").get<std::string>();
    m.dim = jm.value("dim", m.dim);
    m.fps = jm.value("fps", m.fps);
    m.clusters = jm.value("clusters", m.clusters);
    m.temporal = jm.value("temporal", m.temporal);
    if (jm.contains("informative_classes"))
      m.informative_classes = jm.at("informative_classes").get<std::vector<int>>();
    spec.modalities.push_back(std::move(m));
  }
  spec.validate();
  return spec;
}

namespace {

// Hidden symbol stream for one video in temporal mode: uniform filler with
// the class motif written into randomly chosen, window-aligned slots.
std::vector<int> make_symbol_stream(const SynthSpec& spec, int video_class, Eigen::Index length,
                                    Rng& rng) {
  std::vector<int> stream(static_cast<std::size_t>(length));
  for (auto& s : stream) s = static_cast<int>(rng.next_below(kSymbolCount));
  const Eigen::Index windows = length / kMotifLength;
  if (windows < 1) return stream;
  const auto n_sig = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::lround(spec.signal_fraction * static_cast<double>(windows))),
      1, windows);
  const std::vector<Eigen::Index> chosen =
      sample_indices(0, windows, static_cast<int>(n_sig), rng);
  const auto& motif = kMotifOrders[static_cast<std::size_t>(video_class)];
  for (Eigen::Index w : chosen)
    for (int r = 0; r < kMotifLength; ++r)
      stream[static_cast<std::size_t>(w * kMotifLength + r)] = motif[static_cast<std::size_t>(r)];
  return stream;
}

FeatureSequence make_sequence(const SynthSpec& spec, const SynthModality& modality,
                              const ClassSignal& signal, int video_class, double fps,
                              const std::vector<int>& symbols, Rng& rng) {
  FeatureSequence seq;
  seq.modality = modality.name;
  seq.fps = fps;
  const Eigen::Index rows = rows_strictly_before(spec.duration_s, fps);
  require(rows >= 1, "synth: duration too short for modality '" + modality.name + "'");
  seq.data = draw_matrix(rng, rows, modality.dim, spec.noise_scale);

  if (spec.temporal_pattern) {
    if (modality.temporal) {
      // One feature per window of consecutive symbols, order-weighted.
      for (Eigen::Index u = 0; u < rows; ++u) {
        for (int r = 0; r < kMotifLength; ++r) {
          const std::size_t pos = static_cast<std::size_t>(u * kMotifLength + r);
          if (pos >= symbols.size()) break;
          seq.data.row(u) +=
              static_cast<float>(kWindowWeights[static_cast<std::size_t>(r)]) *
              signal.vectors.row(symbols[pos]);
        }
      }
    } else if (!modality.informative_classes.empty()) {
      // Per-frame view of the same stream: marginal only, no order.
      for (Eigen::Index i = 0; i < rows; ++i) {
        const std::size_t pos = static_cast<std::size_t>(i);
        if (pos < symbols.size()) seq.data.row(i) += signal.vectors.row(symbols[pos]);
      }
    }
    return seq;
  }

  const bool informative = std::count(modality.informative_classes.begin(),
                                      modality.informative_classes.end(), video_class) > 0;
  if (informative) {
    const auto n_sig = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::lround(spec.signal_fraction * static_cast<double>(rows))),
        1, rows);
    for (Eigen::Index i : sample_indices(0, rows, static_cast<int>(n_sig), rng))
      seq.data.row(i) += signal.vectors.row(video_class);
  }
  return seq;
}

}  // namespace

SynthOutput generate(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(fs::path(out_dir) / "features");

  // Signatures and embeddings are drawn once from the dataset seed so the
  // train and validation splits share them.
  std::vector<ClassSignal> signals;
  std::vector<double> fps_of;
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    const auto& modality = spec.modalities[m];
    Rng rng(hash_str(hash_u64(spec.seed, 0x736967ULL), modality.name));
    ClassSignal signal;
    if (spec.temporal_pattern) {
      signal.vectors = draw_matrix(rng, kSymbolCount, modality.dim, spec.signal_scale);
      fps_of.push_back(modality.temporal ? 1.0 / static_cast<double>(kMotifLength) : 1.0);
    } else {
      signal.vectors = MatF::Zero(spec.num_classes, modality.dim);
      for (int c = 0; c < spec.num_classes; ++c) {
        MatF row = draw_matrix(rng, 1, modality.dim, spec.signal_scale);
        if (std::count(modality.informative_classes.begin(), modality.informative_classes.end(),
                       c) > 0)
          signal.vectors.row(c) = row;
      }
      fps_of.push_back(modality.fps);
    }
    signals.push_back(std::move(signal));
  }

  auto build_split = [&](const char* prefix, int per_class) {
    Manifest manifest;
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
      const auto& modality = spec.modalities[m];
      ModalitySpec ms;
      ms.name = modality.name;
      ms.dim = modality.dim;
      ms.fps = fps_of[m];
      ms.clusters = modality.clusters;
      manifest.modalities.push_back(std::move(ms));
    }
    for (int c = 0; c < spec.num_classes; ++c) manifest.labels.names.push_back(class_name(c));

    const int total = per_class * spec.num_classes;
    for (int i = 0; i < total; ++i) {
      const int c = i % spec.num_classes;  // interleaved class assignment
      VideoRecord rec;
      rec.id = video_id(prefix, i);
      rec.duration_s = spec.duration_s;
      rec.labels = {c};

      Rng video_rng(hash_str(spec.seed, rec.id));
      std::vector<int> symbols;
      if (spec.temporal_pattern) {
        const Eigen::Index base_len = rows_strictly_before(spec.duration_s, 1.0);
        symbols = make_symbol_stream(spec, c, base_len, video_rng);
      }
      for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
        const FeatureSequence seq = make_sequence(spec, spec.modalities[m], signals[m], c,
                                                  fps_of[m], symbols, video_rng);
        const std::string rel =
            "features/" + rec.id + "_" + spec.modalities[m].name + ".mmf";
        write_features(seq, (fs::path(out_dir) / rel).string(), /*quantize=*/false);
        rec.features[spec.modalities[m].name] = rel;
      }
      manifest.videos.push_back(std::move(rec));
    }
    manifest.base_dir = out_dir;
    return manifest;
  };

  SynthOutput out;
  const Manifest train = build_split("tr", spec.videos_per_class);
  out.train_manifest = (fs::path(out_dir) / "manifest.json").string();
  save_manifest(train, out.train_manifest);
  if (spec.val_videos_per_class > 0) {
    const Manifest val = build_split("va", spec.val_videos_per_class);
    out.val_manifest = (fs::path(out_dir) / "manifest_val.json").string();
    save_manifest(val, out.val_manifest);
  }
  return out;
}

}  // namespace mmagg
