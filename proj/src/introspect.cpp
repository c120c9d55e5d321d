#include "mmagg/introspect.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mmagg {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t modality_index(const ModelConfig& config, const std::string& name) {
  for (std::size_t m = 0; m < config.modalities.size(); ++m)
    if (config.modalities[m].name == name) return m;
  fail("unknown modality '" + name + "'");
}

// Sampled inputs for every segment of a video, one seeded draw per segment.
std::vector<SegmentSample> sample_video(const AggregationModelF& model, const LoadedVideo& video,
                                        std::uint64_t seed) {
  std::vector<SegmentSample> samples;
  samples.reserve(video.segments.size());
  for (const auto& segment : video.segments) {
    const std::uint64_t s = segment_seed(seed, video.record.id, segment.index, 0);
    samples.push_back(sample_segment(model.config, segment, video.features, s));
  }
  return samples;
}

VecD average_forward(const AggregationModelF& model, const std::vector<SegmentSample>& samples,
                     int zeroed_modality) {
  VecD total = VecD::Zero(model.config.classes);
  for (const auto& sample : samples) {
    std::vector<MatF> inputs = sample.inputs;
    if (zeroed_modality >= 0) inputs[static_cast<std::size_t>(zeroed_modality)].setZero();
    total += model_forward(model, inputs).cast<double>();
  }
  return total / static_cast<double>(samples.size());
}

// Number of rows with timestamp i / fps <= t.
Eigen::Index prefix_rows(double t, double fps, Eigen::Index total) {
  auto idx = static_cast<Eigen::Index>(std::floor(t * fps));
  while (static_cast<double>(idx + 1) / fps <= t) ++idx;
  while (idx >= 0 && static_cast<double>(idx) / fps > t) --idx;
  return std::min(idx + 1, total);
}

}  // namespace

AblationReport modality_contribution(const AggregationModelF& model, const LoadedVideo& video,
                                     int class_index, std::uint64_t seed) {
  require(class_index >= 0 && class_index < model.config.classes,
          "modality_contribution: unknown class index " + std::to_string(class_index));
  require(!video.segments.empty(), "modality_contribution: video has no segments");
  const std::vector<SegmentSample> samples = sample_video(model, video, seed);

  AblationReport report;
  report.video_id = video.record.id;
  report.class_index = class_index;
  report.full_probability = average_forward(model, samples, -1)[class_index];
  for (std::size_t m = 0; m < model.config.modalities.size(); ++m) {
    const double padded = average_forward(model, samples, static_cast<int>(m))[class_index];
    report.modalities.push_back(model.config.modalities[m].name);
    report.padded_probability.push_back(padded);
    report.contribution.push_back(report.full_probability - padded);
  }
  return report;
}

AssignmentHistogram assignment_histogram(const AggregationModelF& model, const LoadedVideo& video,
                                         const std::string& modality, std::uint64_t seed) {
  const std::size_t m = modality_index(model.config, modality);
  const std::vector<SegmentSample> samples = sample_video(model, video, seed);

  AssignmentHistogram hist;
  hist.video_id = video.record.id;
  hist.modality = modality;
  const Eigen::Index clusters = model.vlad[m].clusters();
  hist.mass = VecD::Zero(clusters);
  hist.padded_mass = VecD::Zero(clusters);
  for (const auto& sample : samples) {
    const MatF& input = sample.inputs[m];
    const MatF assign = soft_assign(model.vlad[m], input);
    const MatF zero_assign =
        soft_assign(model.vlad[m], MatF(MatF::Zero(input.rows(), input.cols())));
    hist.mass += assign.colwise().sum().transpose().cast<double>();
    hist.padded_mass += zero_assign.colwise().sum().transpose().cast<double>();
    hist.frame_count += static_cast<double>(input.rows());
  }
  return hist;
}

std::vector<TimelinePoint> probability_timeline(const AggregationModelF& model,
                                                const LoadedVideo& video, int class_index,
                                                double step_s, std::uint64_t seed) {
  require(step_s > 0.0, "probability_timeline: step must be positive");
  require(class_index >= 0 && class_index < model.config.classes,
          "probability_timeline: unknown class index " + std::to_string(class_index));

  std::vector<double> times;
  for (double t = step_s; t <= video.record.duration_s; t += step_s) times.push_back(t);
  if (times.empty() || times.back() < video.record.duration_s)
    times.push_back(video.record.duration_s);

  std::vector<TimelinePoint> timeline;
  timeline.reserve(times.size());
  for (std::size_t point = 0; point < times.size(); ++point) {
    const double t = times[point];
    Rng rng(hash_u64(hash_str(seed, video.record.id), point));
    std::vector<MatF> inputs;
    inputs.reserve(model.config.modalities.size());
    for (const auto& spec : model.config.modalities) {
      const FeatureSequence& seq = video.features.at(spec.name);
      const Eigen::Index rows = prefix_rows(t, spec.fps, seq.count());
      require(rows >= 1, "probability_timeline: no '" + spec.name + "' rows before t=" + fmt(t));
      std::vector<Eigen::Index> indices;
      if (rows <= model.config.sample_size) {
        for (Eigen::Index i = 0; i < rows; ++i) indices.push_back(i);
      } else {
        indices = sample_indices(0, rows, model.config.sample_size, rng);
      }
      inputs.push_back(gather_rows(seq, indices));
    }
    const VecF y = model_forward(model, inputs);
    timeline.push_back({t, static_cast<double>(y[class_index])});
  }
  return timeline;
}

std::vector<ClusterFrame> top_frames_for_cluster(const AggregationModelF& model,
                                                 const std::vector<LoadedVideo>& dataset,
                                                 const std::string& modality, int cluster,
                                                 int top_n, std::uint64_t seed) {
  require(!dataset.empty(), "top_frames_for_cluster: empty dataset");
  require(top_n >= 1, "top_frames_for_cluster: top_n must be >= 1");
  const std::size_t m = modality_index(model.config, modality);
  require(cluster >= 0 && cluster < model.vlad[m].clusters(),
          "top_frames_for_cluster: cluster index out of range");
  const double fps = model.config.modalities[m].fps;

  std::vector<ClusterFrame> frames;
  for (const auto& video : dataset) {
    const std::vector<SegmentSample> samples = sample_video(model, video, seed);
    for (const auto& sample : samples) {
      const MatF assign = soft_assign(model.vlad[m], sample.inputs[m]);
      const auto& indices = sample.indices.at(modality);
      for (std::size_t i = 0; i < indices.size(); ++i) {
        frames.push_back({video.record.id, static_cast<double>(indices[i]) / fps,
                          static_cast<double>(assign(static_cast<Eigen::Index>(i), cluster))});
      }
    }
  }
  std::sort(frames.begin(), frames.end(), [](const ClusterFrame& a, const ClusterFrame& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.video_id != b.video_id) return a.video_id < b.video_id;
    return a.timestamp < b.timestamp;
  });
  if (static_cast<int>(frames.size()) > top_n) frames.resize(static_cast<std::size_t>(top_n));
  return frames;
}

ExportFormat parse_export_format(const std::string& name) {
  if (name == "csv") return ExportFormat::Csv;
  if (name == "json") return ExportFormat::Json;
  if (name == "svg") return ExportFormat::Svg;
  fail("unknown export format '" + name + "' (expected csv, json or svg)");
}

namespace {

void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  require(os.good(), "cannot open '" + path + "' for writing");
  os << content;
  require(os.good(), "write failed for '" + path + "'");
}

std::string svg_header(int width, int height) {
  std::ostringstream ss;
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  return ss.str();
}

std::string svg_bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                          const std::string& title, const std::string& y_label) {
  const int width = 640, height = 400;
  const double left = 70, right = 20, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  double lo = 0.0, hi = 0.0;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;
  auto y_of = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };

  std::ostringstream ss;
  ss << svg_header(width, height);
  ss << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  ss << "<text x=\"15\" y=\"" << top + plot_h / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << top + plot_h / 2 << ")\">"
     << y_label << "</text>\n";
  // Axes.
  ss << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << top + plot_h << "\" stroke=\"black\"/>\n";
  ss << "<line x1=\"" << left << "\" y1=\"" << y_of(0.0) << "\" x2=\"" << left + plot_w
     << "\" y2=\"" << y_of(0.0) << "\" stroke=\"black\"/>\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", hi);
  ss << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << buf
     << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.3g", lo);
  ss << "<text x=\"" << left - 6 << "\" y=\"" << top + plot_h << "\" text-anchor=\"end\">" << buf
     << "</text>\n";

  const double slot = plot_w / static_cast<double>(values.size());
  const double bar_w = slot * 0.7;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = left + slot * static_cast<double>(i) + (slot - bar_w) / 2.0;
    const double y0 = y_of(std::max(0.0, values[i]));
    const double h = std::abs(y_of(values[i]) - y_of(0.0));
    ss << "<rect class=\"bar\" x=\"" << x << "\" y=\"" << y0 << "\" width=\"" << bar_w
       << "\" height=\"" << h << "\" fill=\"steelblue\"/>\n";
    ss << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 16
       << "\" text-anchor=\"middle\" font-size=\"10\">" << labels[i] << "</text>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

std::string svg_line_chart(const std::vector<double>& xs, const std::vector<double>& ys,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
  const int width = 640, height = 400;
  const double left = 70, right = 20, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  double x_lo = xs.front(), x_hi = xs.back();
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  double y_lo = 0.0, y_hi = 1.0;  // probabilities
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * plot_h; };

  std::ostringstream ss;
  ss << svg_header(width, height);
  ss << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  ss << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15
     << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  ss << "<text x=\"15\" y=\"" << top + plot_h / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << top + plot_h / 2 << ")\">"
     << y_label << "</text>\n";
  ss << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << top + plot_h << "\" stroke=\"black\"/>\n";
  ss << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
     << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";

  ss << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) ss << px(xs[i]) << "," << py(ys[i]) << " ";
  ss << "\"/>\n";
  ss << "</svg>\n";
  return ss.str();
}

}  // namespace

void export_report(const AblationReport& report, const std::string& path, ExportFormat format) {
  require(!report.modalities.empty(), "export: empty ablation report");
  switch (format) {
    case ExportFormat::Csv: {
      std::ostringstream ss;
      ss << "video_id,class_index,modality,full_probability,padded_probability,contribution\n";
      for (std::size_t m = 0; m < report.modalities.size(); ++m) {
        ss << report.video_id << ',' << report.class_index << ',' << report.modalities[m] << ','
           << fmt(report.full_probability) << ',' << fmt(report.padded_probability[m]) << ','
           << fmt(report.contribution[m]) << '\n';
      }
      write_text(path, ss.str());
      break;
    }
    case ExportFormat::Json: {
      ordered_json j;
      j["video_id"] = report.video_id;
      j["class_index"] = report.class_index;
      j["full_probability"] = report.full_probability;
      j["modalities"] = report.modalities;
      j["padded_probability"] = report.padded_probability;
      j["contribution"] = report.contribution;
      write_text(path, j.dump(2) + "\n");
      break;
    }
    case ExportFormat::Svg:
      write_text(path, svg_bar_chart(report.modalities, report.contribution,
                                     "Modality contribution: " + report.video_id,
                                     "full - padded probability"));
      break;
  }
}

void export_report(const AssignmentHistogram& report, const std::string& path,
                   ExportFormat format) {
  require(report.mass.size() > 0, "export: empty histogram");
  switch (format) {
    case ExportFormat::Csv: {
      std::ostringstream ss;
      ss << "cluster,mass,padded_mass\n";
      for (Eigen::Index k = 0; k < report.mass.size(); ++k)
        ss << k << ',' << fmt(report.mass[k]) << ',' << fmt(report.padded_mass[k]) << '\n';
      write_text(path, ss.str());
      break;
    }
    case ExportFormat::Json: {
      ordered_json j;
      j["video_id"] = report.video_id;
      j["modality"] = report.modality;
      j["frame_count"] = report.frame_count;
      j["mass"] = std::vector<double>(report.mass.data(), report.mass.data() + report.mass.size());
      j["padded_mass"] = std::vector<double>(report.padded_mass.data(),
                                             report.padded_mass.data() + report.padded_mass.size());
      write_text(path, j.dump(2) + "\n");
      break;
    }
    case ExportFormat::Svg: {
      std::vector<std::string> labels;
      std::vector<double> values;
      for (Eigen::Index k = 0; k < report.mass.size(); ++k) {
        labels.push_back(std::to_string(k));
        values.push_back(report.mass[k]);
      }
      write_text(path, svg_bar_chart(labels, values,
                                     "Cluster assignment: " + report.modality, "mass"));
      break;
    }
  }
}

void export_report(const std::vector<TimelinePoint>& timeline, const std::string& path,
                   ExportFormat format) {
  require(!timeline.empty(), "export: empty timeline");
  switch (format) {
    case ExportFormat::Csv: {
      std::ostringstream ss;
      ss << "t,probability\n";
      for (const auto& p : timeline) ss << fmt(p.t) << ',' << fmt(p.probability) << '\n';
      write_text(path, ss.str());
      break;
    }
    case ExportFormat::Json: {
      ordered_json j = ordered_json::array();
      for (const auto& p : timeline) {
        ordered_json jp;
        jp["t"] = p.t;
        jp["probability"] = p.probability;
        j.push_back(std::move(jp));
      }
      write_text(path, j.dump(2) + "\n");
      break;
    }
    case ExportFormat::Svg: {
      std::vector<double> xs, ys;
      for (const auto& p : timeline) {
        xs.push_back(p.t);
        ys.push_back(p.probability);
      }
      write_text(path, svg_line_chart(xs, ys, "Probability timeline", "time (s)", "probability"));
      break;
    }
  }
}

void export_report(const std::vector<ClusterFrame>& frames, const std::string& path,
                   ExportFormat format) {
  require(!frames.empty(), "export: empty cluster-frame list");
  switch (format) {
    case ExportFormat::Csv: {
      std::ostringstream ss;
      ss << "video_id,timestamp,weight\n";
      for (const auto& f : frames)
        ss << f.video_id << ',' << fmt(f.timestamp) << ',' << fmt(f.weight) << '\n';
      write_text(path, ss.str());
      break;
    }
    case ExportFormat::Json: {
      ordered_json j = ordered_json::array();
      for (const auto& f : frames) {
        ordered_json jf;
        jf["video_id"] = f.video_id;
        jf["timestamp"] = f.timestamp;
        jf["weight"] = f.weight;
        j.push_back(std::move(jf));
      }
      write_text(path, j.dump(2) + "\n");
      break;
    }
    case ExportFormat::Svg: {
      std::vector<std::string> labels;
      std::vector<double> values;
      for (const auto& f : frames) {
        labels.push_back(f.video_id + "@" + std::to_string(f.timestamp));
        values.push_back(f.weight);
      }
      write_text(path, svg_bar_chart(labels, values, "Top cluster assignments", "assignment"));
      break;
    }
  }
}

}  // namespace mmagg
