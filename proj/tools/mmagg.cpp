#include "mmagg/config.hpp"
#include "mmagg/eval.hpp"
#include "mmagg/introspect.hpp"
#include "mmagg/pipeline.hpp"
#include "mmagg/preprocess.hpp"
#include "mmagg/synthgen.hpp"
#include "mmagg/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace mmagg;

namespace {

constexpr const char* kVersion = "mmagg 0.1.0";

std::uint64_t file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open '" + path + "' for digest");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (is.eof()) break;
  }
  return h;
}

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config(path);
}

struct CommonModelArgs {
  std::string ckpt;
  std::string manifest_path;
  std::uint64_t seed = 42;
};

void add_format_flags(CLI::App* cmd, std::string& format, std::string& out) {
  cmd->add_option("--format", format, "Output format: csv, json or svg")
      ->default_val("csv")
      ->check(CLI::IsMember({"csv", "json", "svg"}));
  cmd->add_option("--out", out, "Output file path")->required();
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const SynthSpec spec = load_synth_spec(spec_path);
  const SynthOutput out = generate(spec, out_dir);
  std::cout << "manifest " << out.train_manifest << "\n";
  if (!out.val_manifest.empty()) std::cout << "manifest_val " << out.val_manifest << "\n";
  return 0;
}

int cmd_fit_preprocess(const std::string& manifest_path, const std::string& config_path,
                       const std::string& out_dir, std::uint64_t seed) {
  const Manifest manifest = load_manifest(manifest_path);
  const RunConfig config = config_or_default(config_path);
  fs::create_directories(out_dir);
  for (const auto& spec : manifest.modalities) {
    auto it = config.pca_dims.find(spec.name);
    require(it != config.pca_dims.end(),
            "config: no pca_dims entry for modality '" + spec.name + "'");
    const int target = it->second;

    // Seeded uniform reservoir over every frame of the modality.
    Rng rng(hash_str(hash_u64(seed, 0x706361ULL), spec.name));
    std::vector<VecD> reservoir;
    reservoir.reserve(static_cast<std::size_t>(config.pca_sample_cap));
    std::uint64_t seen = 0;
    for (const auto& video : manifest.videos) {
      auto f = video.features.find(spec.name);
      if (f == video.features.end()) continue;
      FeatureSequence seq = read_features(manifest.resolve_path(f->second));
      require(seq.dim() == spec.dim,
              "video '" + video.id + "': dim mismatch for modality '" + spec.name + "'");
      for (Eigen::Index i = 0; i < seq.count(); ++i) {
        const VecD row = seq.data.row(i).transpose().cast<double>();
        if (seen < static_cast<std::uint64_t>(config.pca_sample_cap)) {
          reservoir.push_back(row);
        } else {
          const std::uint64_t j = rng.next_below(seen + 1);
          if (j < reservoir.size()) reservoir[static_cast<std::size_t>(j)] = row;
        }
        ++seen;
      }
    }
    require(reservoir.size() >= 2,
            "modality '" + spec.name + "': not enough frames to fit PCA");
    MatD samples(static_cast<Eigen::Index>(reservoir.size()), spec.dim);
    for (std::size_t i = 0; i < reservoir.size(); ++i)
      samples.row(static_cast<Eigen::Index>(i)) = reservoir[i].transpose();

    const PreprocessModel model =
        fit_pca(samples, target, config.whiten_eps, config.clip_bound);
    const std::string path = (fs::path(out_dir) / (spec.name + ".ppm")).string();
    save_preprocess_model(model, path);
    std::cout << "fitted " << spec.name << ": " << spec.dim << " -> " << target << " dims ("
              << reservoir.size() << " frames) -> " << path << "\n";
  }
  return 0;
}

int cmd_apply_preprocess(const std::string& manifest_path, const std::string& models_dir,
                         const std::string& out_dir, bool quantize) {
  const Manifest manifest = load_manifest(manifest_path);
  fs::create_directories(fs::path(out_dir) / "features");

  std::map<std::string, PreprocessModel> models;
  for (const auto& spec : manifest.modalities) {
    const std::string path = (fs::path(models_dir) / (spec.name + ".ppm")).string();
    require(fs::exists(path), "no preprocess model for modality '" + spec.name + "' at " + path);
    models[spec.name] = load_preprocess_model(path);
    require(models[spec.name].input_dim() == spec.dim,
            "preprocess model for '" + spec.name + "' expects dim " +
                std::to_string(models[spec.name].input_dim()));
  }

  Manifest out = manifest;
  out.base_dir = out_dir;
  for (auto& spec : out.modalities)
    spec.dim = static_cast<int>(models[spec.name].output_dim());
  for (auto& video : out.videos) {
    for (auto& [name, rel] : video.features) {
      const PreprocessModel& model = models[name];
      FeatureSequence seq = read_features(manifest.resolve_path(rel));
      FeatureSequence transformed;
      transformed.modality = name;
      transformed.fps = seq.fps;
      transformed.data =
          transform_rows(model, seq.data.cast<double>()).cast<float>();
      const std::string new_rel = "features/" + video.id + "_" + name + ".mmf";
      write_features(transformed, (fs::path(out_dir) / new_rel).string(), quantize,
                     model.clip_bound);
      rel = new_rel;
    }
  }
  const std::string out_manifest = (fs::path(out_dir) / "manifest.json").string();
  save_manifest(out, out_manifest);
  std::cout << "manifest " << out_manifest << "\n";
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& out_path, const std::vector<std::string>& modalities,
              int epochs, std::uint64_t seed, int sample_size, int threads, bool save_optimizer) {
  Manifest manifest = load_manifest(manifest_path);
  if (!modalities.empty()) manifest = manifest.restricted_to(modalities);

  RunConfig config = config_or_default(config_path);
  if (epochs >= 0) config.epochs = epochs;
  if (seed != 0) config.seed = seed;
  if (sample_size > 0) config.sample_size = sample_size;
  if (threads > 0) config.threads = threads;

  ModelConfig model_config = make_model_config(config, &manifest);
  AggregationModelF model = init_model<float>(model_config);
  AdamState<float> optimizer;

  TrainOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.seed = config.seed;
  options.adam = config.adam;
  options.threads = config.threads;

  const TrainLog log = train(model, optimizer, manifest, options);
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e)
    std::cout << "epoch " << e << " loss " << log.epoch_loss[e] << "\n";
  if (log.skipped_steps > 0)
    std::cout << "skipped " << log.skipped_steps << " steps with non-finite gradients\n";

  save_model(model, out_path, save_optimizer ? &optimizer : nullptr);
  char digest[32];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(file_digest(out_path)));
  std::cout << "checkpoint " << out_path << " digest " << digest << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& manifest_path,
                const std::string& out_path, int repeats, std::uint64_t seed, int threads) {
  const AggregationModelF model = load_model(ckpt);
  const Manifest manifest = load_manifest(manifest_path);
  const std::vector<LoadedVideo> dataset = load_dataset(manifest, model.config);

  std::vector<Prediction> predictions(dataset.size());
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      predictions[i].video_id = dataset[i].record.id;
      VecD p = repeated_eval_average(model, dataset[i], repeats, seed);
      for (Eigen::Index c = 0; c < p.size(); ++c) p[c] = std::clamp(p[c], 0.0, 1.0);
      predictions[i].probs = std::move(p);
    }
  };
  if (threads <= 1) {
    run_range(0, dataset.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (dataset.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t lo = std::min(dataset.size(), t * chunk);
      const std::size_t hi = std::min(dataset.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  const PredictionSet set =
      make_prediction_set(manifest, std::move(predictions), /*require_labels=*/false);
  write_predictions_csv(set, out_path);
  std::cout << "predictions " << out_path << " (" << set.predictions.size() << " videos)\n";
  return 0;
}

int cmd_evaluate(const std::string& predictions_path, const std::string& manifest_path,
                 const std::string& subset_name, std::string per_class_path) {
  const Manifest manifest = load_manifest(manifest_path);
  const PredictionSet preds = read_predictions_csv(predictions_path, manifest);
  std::vector<int> subset;
  const std::vector<int>* subset_ptr = nullptr;
  if (!subset_name.empty()) {
    subset = resolve_subset(manifest, subset_name);
    subset_ptr = &subset;
  }
  const MapResult result = map_eval(preds, subset_ptr);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", result.map);
  std::cout << "mAP " << buf << "\n";
  if (!result.excluded.empty()) {
    std::cout << "excluded classes (no positives):";
    for (int c : result.excluded) std::cout << " " << c;
    std::cout << "\n";
  }
  if (per_class_path.empty()) per_class_path = predictions_path + ".per_class.csv";
  write_per_class_csv(result, per_class_path);
  std::cout << "per-class AP " << per_class_path << "\n";
  return 0;
}

int cmd_ensemble(const std::vector<std::string>& inputs, const std::string& out_path) {
  require(!inputs.empty(), "ensemble: needs at least one predictions file");
  std::vector<PredictionSet> sets;
  sets.reserve(inputs.size());
  for (const auto& path : inputs) sets.push_back(read_predictions_csv_raw(path));
  const PredictionSet merged = ensemble_average(sets);
  write_predictions_csv(merged, out_path);
  std::cout << "ensemble of " << sets.size() << " -> " << out_path << "\n";
  return 0;
}

int cmd_ablate(const CommonModelArgs& args, const std::string& video_id, int class_index,
               const std::string& format, const std::string& out_path) {
  const AggregationModelF model = load_model(args.ckpt);
  const Manifest manifest = load_manifest(args.manifest_path);
  const LoadedVideo video = load_video(manifest, manifest.video(video_id), model.config);
  const AblationReport report = modality_contribution(model, video, class_index, args.seed);
  export_report(report, out_path, parse_export_format(format));
  std::cout << "video " << report.video_id << " class " << report.class_index << " full "
            << report.full_probability << "\n";
  for (std::size_t m = 0; m < report.modalities.size(); ++m)
    std::cout << "  " << report.modalities[m] << " contribution " << report.contribution[m]
              << "\n";
  return 0;
}

int cmd_inspect_clusters(const CommonModelArgs& args, const std::string& modality, int cluster,
                         int top_n, const std::string& format, const std::string& out_path) {
  const AggregationModelF model = load_model(args.ckpt);
  const Manifest manifest = load_manifest(args.manifest_path);
  const std::vector<LoadedVideo> dataset = load_dataset(manifest, model.config);
  const std::vector<ClusterFrame> frames =
      top_frames_for_cluster(model, dataset, modality, cluster, top_n, args.seed);
  export_report(frames, out_path, parse_export_format(format));
  std::cout << frames.size() << " frames for cluster " << cluster << " of " << modality << " -> "
            << out_path << "\n";
  return 0;
}

int cmd_timeline(const CommonModelArgs& args, const std::string& video_id, int class_index,
                 double step_s, const std::string& format, const std::string& out_path) {
  const AggregationModelF model = load_model(args.ckpt);
  const Manifest manifest = load_manifest(args.manifest_path);
  const LoadedVideo video = load_video(manifest, manifest.video(video_id), model.config);
  const std::vector<TimelinePoint> timeline =
      probability_timeline(model, video, class_index, step_s, args.seed);
  export_report(timeline, out_path, parse_export_format(format));
  std::cout << timeline.size() << " timeline points -> " << out_path << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& config_path, double step, double tolerance) {
  RunConfig config = load_run_config(config_path);
  if (step > 0) config.fd_step = step;
  if (tolerance > 0) config.fd_tolerance = tolerance;
  const ModelConfig model_config = make_model_config(config, nullptr);
  AggregationModelD model = init_model<double>(model_config);

  Rng rng(hash_u64(config.seed, 0x6763696eULL));
  std::vector<MatD> inputs;
  for (const auto& spec : model_config.modalities) {
    MatD x(model_config.sample_size, spec.dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.next_normal();
    inputs.push_back(std::move(x));
  }
  VecD targets(model_config.classes);
  for (Eigen::Index c = 0; c < targets.size(); ++c)
    targets[c] = rng.next_below(2) == 0 ? 0.0 : 1.0;

  const GradCheckReport report =
      gradient_check(model, inputs, targets, config.fd_step, config.fd_tolerance);
  for (const auto& entry : report.entries) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s max_rel_err %.3e max_abs_err %.3e %s",
                  entry.tensor.c_str(), entry.max_rel_err, entry.max_abs_err,
                  entry.ok ? "ok" : "FAIL");
    std::cout << line << "\n";
  }
  char summary[128];
  std::snprintf(summary, sizeof(summary), "max relative error %.3e (tolerance %.1e): %s",
                report.max_rel_err, config.fd_tolerance, report.ok ? "PASS" : "FAIL");
  std::cout << summary << "\n";
  return report.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal video classification pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "Synth spec JSON")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // fit-preprocess
  auto* fitp = app.add_subcommand("fit-preprocess", "Fit per-modality PCA/whitening models");
  std::string fitp_manifest, fitp_config, fitp_out;
  std::uint64_t fitp_seed = 42;
  fitp->add_option("--manifest", fitp_manifest)->required();
  fitp->add_option("--config", fitp_config, "Run config JSON with pca_dims")->required();
  fitp->add_option("--out", fitp_out, "Output directory for .ppm models")->required();
  fitp->add_option("--seed", fitp_seed, "Subsampling seed");

  // apply-preprocess
  auto* applyp = app.add_subcommand("apply-preprocess", "Transform and quantize a dataset");
  std::string applyp_manifest, applyp_models, applyp_out;
  bool applyp_raw = false;
  applyp->add_option("--manifest", applyp_manifest)->required();
  applyp->add_option("--models", applyp_models, "Directory of .ppm models")->required();
  applyp->add_option("--out", applyp_out, "Output dataset directory")->required();
  applyp->add_flag("--raw", applyp_raw, "Write raw 32-bit values instead of 8-bit codes");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  std::string train_manifest, train_config, train_out;
  std::vector<std::string> train_modalities;
  int train_epochs = -1, train_sample_size = 0, train_threads = 0;
  std::uint64_t train_seed = 0;
  bool train_save_opt = false;
  train_cmd->add_option("--manifest", train_manifest)->required();
  train_cmd->add_option("--config", train_config, "Run config JSON");
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", train_epochs, "Override config epochs");
  train_cmd->add_option("--seed", train_seed, "Override config seed");
  train_cmd->add_option("--sample-size", train_sample_size, "Frames sampled per segment");
  train_cmd->add_option("--threads", train_threads, "Worker threads (default 1)");
  train_cmd->add_option("--modalities", train_modalities, "Restrict to these modalities")
      ->delimiter(',');
  train_cmd->add_flag("--save-optimizer", train_save_opt, "Store optimizer state");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Write prediction scores");
  std::string pred_ckpt, pred_manifest, pred_out;
  int pred_repeats = 5, pred_threads = 1;
  std::uint64_t pred_seed = 42;
  predict_cmd->add_option("--ckpt", pred_ckpt)->required();
  predict_cmd->add_option("--manifest", pred_manifest)->required();
  predict_cmd->add_option("--out", pred_out, "Predictions CSV path")->required();
  predict_cmd->add_option("--repeats", pred_repeats, "Random test repeats (default 5)");
  predict_cmd->add_option("--seed", pred_seed, "Sampling seed (default 42)");
  predict_cmd->add_option("--threads", pred_threads, "Worker threads (default 1)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Compute mAP for a predictions file");
  std::string eval_preds, eval_manifest, eval_subset, eval_per_class;
  eval_cmd->add_option("--predictions", eval_preds)->required();
  eval_cmd->add_option("--manifest", eval_manifest)->required();
  eval_cmd->add_option("--subset", eval_subset, "Named class subset (e.g. food)");
  eval_cmd->add_option("--per-class", eval_per_class, "Per-class AP CSV path");

  // ensemble
  auto* ens_cmd = app.add_subcommand("ensemble", "Average prediction files");
  std::vector<std::string> ens_inputs;
  std::string ens_out;
  ens_cmd->add_option("inputs", ens_inputs, "Prediction CSV files")->required();
  ens_cmd->add_option("--out", ens_out)->required();

  // ablate
  auto* abl_cmd = app.add_subcommand("ablate", "Zero-pad modality contributions");
  CommonModelArgs abl_args;
  std::string abl_video, abl_format, abl_out;
  int abl_class = 0;
  abl_cmd->add_option("--ckpt", abl_args.ckpt)->required();
  abl_cmd->add_option("--manifest", abl_args.manifest_path)->required();
  abl_cmd->add_option("--video", abl_video)->required();
  abl_cmd->add_option("--class", abl_class)->required();
  abl_cmd->add_option("--seed", abl_args.seed);
  add_format_flags(abl_cmd, abl_format, abl_out);

  // inspect-clusters
  auto* ins_cmd = app.add_subcommand("inspect-clusters", "Top frames per VLAD cluster");
  CommonModelArgs ins_args;
  std::string ins_modality, ins_format, ins_out;
  int ins_cluster = 0, ins_top = 10;
  ins_cmd->add_option("--ckpt", ins_args.ckpt)->required();
  ins_cmd->add_option("--manifest", ins_args.manifest_path)->required();
  ins_cmd->add_option("--modality", ins_modality)->required();
  ins_cmd->add_option("--cluster", ins_cluster)->required();
  ins_cmd->add_option("--top", ins_top, "Number of frames (default 10)");
  ins_cmd->add_option("--seed", ins_args.seed);
  add_format_flags(ins_cmd, ins_format, ins_out);

  // timeline
  auto* tl_cmd = app.add_subcommand("timeline", "Prefix probability timeline");
  CommonModelArgs tl_args;
  std::string tl_video, tl_format, tl_out;
  int tl_class = 0;
  double tl_step = 10.0;
  tl_cmd->add_option("--ckpt", tl_args.ckpt)->required();
  tl_cmd->add_option("--manifest", tl_args.manifest_path)->required();
  tl_cmd->add_option("--video", tl_video)->required();
  tl_cmd->add_option("--class", tl_class)->required();
  tl_cmd->add_option("--step", tl_step, "Prefix step in seconds (default 10)");
  tl_cmd->add_option("--seed", tl_args.seed);
  add_format_flags(tl_cmd, tl_format, tl_out);

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  std::string gc_config;
  double gc_step = 0.0, gc_tol = 0.0;
  gc_cmd->add_option("--config", gc_config)->required();
  gc_cmd->add_option("--step", gc_step, "Finite-difference step");
  gc_cmd->add_option("--tolerance", gc_tol, "Max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_spec, synth_out);
    if (fitp->parsed()) return cmd_fit_preprocess(fitp_manifest, fitp_config, fitp_out, fitp_seed);
    if (applyp->parsed())
      return cmd_apply_preprocess(applyp_manifest, applyp_models, applyp_out, !applyp_raw);
    if (train_cmd->parsed())
      return cmd_train(train_manifest, train_config, train_out, train_modalities, train_epochs,
                       train_seed, train_sample_size, train_threads, train_save_opt);
    if (predict_cmd->parsed())
      return cmd_predict(pred_ckpt, pred_manifest, pred_out, pred_repeats, pred_seed,
                         pred_threads);
    if (eval_cmd->parsed())
      return cmd_evaluate(eval_preds, eval_manifest, eval_subset, eval_per_class);
    if (ens_cmd->parsed()) return cmd_ensemble(ens_inputs, ens_out);
    if (abl_cmd->parsed()) return cmd_ablate(abl_args, abl_video, abl_class, abl_format, abl_out);
    if (ins_cmd->parsed())
      return cmd_inspect_clusters(ins_args, ins_modality, ins_cluster, ins_top, ins_format,
                                  ins_out);
    if (tl_cmd->parsed())
      return cmd_timeline(tl_args, tl_video, tl_class, tl_step, tl_format, tl_out);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_config, gc_step, gc_tol);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 2;
}
