#include "mmagg/feature_io.hpp"

#include "mmagg/binio.hpp"
#include "mmagg/preprocess.hpp"

#include <fstream>

namespace mmagg {

namespace {
constexpr char kMagic[4] = {'M', 'M', 'F', '1'};
constexpr std::uint8_t kDtypeRaw = 0;
constexpr std::uint8_t kDtypeQuantized = 1;
}  // namespace

void FeatureSequence::validate() const {
  require(fps > 0.0, "feature sequence: fps must be positive");
  require(dim() >= 1, "feature sequence: dim must be >= 1");
  require(all_finite(data), "feature sequence: non-finite values");
}

FeatureSequence read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open feature file '" + path + "'");
  char magic[4] = {};
  is.read(magic, 4);
  require(is.gcount() == 4 && std::equal(magic, magic + 4, kMagic),
          "'" + path + "': bad feature-file magic");
  const std::uint8_t dtype = binio::get_u8(is, "dtype");
  require(dtype == kDtypeRaw || dtype == kDtypeQuantized,
          "'" + path + "': unknown dtype " + std::to_string(dtype));
  const std::uint32_t dim = binio::get_u32(is, "dim");
  require(dim >= 1, "'" + path + "': dim must be >= 1");
  const double fps = binio::get_f64(is, "fps");
  require(fps > 0.0, "'" + path + "': fps must be positive");
  const std::uint64_t count = binio::get_u64(is, "count");

  FeatureSequence seq;
  seq.fps = fps;
  seq.data.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));

  if (dtype == kDtypeRaw) {
    for (Eigen::Index i = 0; i < seq.data.rows(); ++i)
      for (Eigen::Index j = 0; j < seq.data.cols(); ++j)
        seq.data(i, j) = binio::get_f32(is, "'" + path + "' payload");
  } else {
    const float bound = binio::get_f32(is, "clip bound");
    require(bound > 0.0f, "'" + path + "': clip bound must be positive");
    for (Eigen::Index i = 0; i < seq.data.rows(); ++i)
      for (Eigen::Index j = 0; j < seq.data.cols(); ++j) {
        const std::uint8_t code = binio::get_u8(is, "'" + path + "' payload");
        seq.data(i, j) = static_cast<float>(dequantize_value(code, static_cast<double>(bound)));
      }
  }
  seq.validate();
  return seq;
}

void write_features(const FeatureSequence& seq, const std::string& path, bool quantize,
                    double clip_bound) {
  seq.validate();
  require(clip_bound > 0.0, "write_features: clip bound must be positive");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), "cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  binio::put_u8(os, quantize ? kDtypeQuantized : kDtypeRaw);
  binio::put_u32(os, static_cast<std::uint32_t>(seq.dim()));
  binio::put_f64(os, seq.fps);
  binio::put_u64(os, static_cast<std::uint64_t>(seq.count()));
  if (quantize) {
    binio::put_f32(os, static_cast<float>(clip_bound));
    for (Eigen::Index i = 0; i < seq.data.rows(); ++i)
      for (Eigen::Index j = 0; j < seq.data.cols(); ++j)
        binio::put_u8(os, quantize_value(static_cast<double>(seq.data(i, j)), clip_bound));
  } else {
    for (Eigen::Index i = 0; i < seq.data.rows(); ++i)
      for (Eigen::Index j = 0; j < seq.data.cols(); ++j) binio::put_f32(os, seq.data(i, j));
  }
  require(os.good(), "write failed for '" + path + "'");
}

}  // namespace mmagg
