#include "mmagg/checkpoint.hpp"

#include "mmagg/binio.hpp"

#include <fstream>
#include <limits>

namespace mmagg {

namespace {
constexpr char kMagic[4] = {'M', 'M', 'C', 'K'};
}

Tensor Tensor::from_f32(std::string name, std::vector<std::uint64_t> dims,
                        std::vector<float> data) {
  Tensor t;
  t.name = std::move(name);
  t.dtype = DType::F32;
  t.dims = std::move(dims);
  t.f32 = std::move(data);
  require(t.f32.size() == t.element_count(), "tensor " + t.name + ": dims/payload mismatch");
  return t;
}

Tensor Tensor::from_f64(std::string name, std::vector<std::uint64_t> dims,
                        std::vector<double> data) {
  Tensor t;
  t.name = std::move(name);
  t.dtype = DType::F64;
  t.dims = std::move(dims);
  t.f64 = std::move(data);
  require(t.f64.size() == t.element_count(), "tensor " + t.name + ": dims/payload mismatch");
  return t;
}

Tensor Tensor::from_bytes(std::string name, std::vector<std::uint8_t> data) {
  Tensor t;
  t.name = std::move(name);
  t.dtype = DType::U8;
  t.dims = {data.size()};
  t.u8 = std::move(data);
  return t;
}

Tensor Tensor::scalar_f64(std::string name, double value) {
  return from_f64(std::move(name), {1}, {value});
}

const Tensor* TensorTable::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const Tensor& TensorTable::get(const std::string& name) const {
  const Tensor* t = find(name);
  if (t == nullptr) fail("checkpoint: missing tensor '" + name + "'");
  return *t;
}

void TensorTable::add(Tensor t) {
  require(find(t.name) == nullptr, "checkpoint: duplicate tensor '" + t.name + "'");
  tensors.push_back(std::move(t));
}

void write_tensor_table(const TensorTable& table, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), "cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  binio::put_u32(os, kCheckpointVersion);
  binio::put_u64(os, table.tensors.size());
  for (const auto& t : table.tensors) {
    require(t.name.size() <= std::numeric_limits<std::uint16_t>::max(),
            "tensor name too long: " + t.name);
    binio::put_u16(os, static_cast<std::uint16_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    binio::put_u8(os, static_cast<std::uint8_t>(t.dtype));
    binio::put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) binio::put_u64(os, d);
    switch (t.dtype) {
      case Tensor::DType::F32:
        for (float v : t.f32) binio::put_f32(os, v);
        break;
      case Tensor::DType::U8:
        os.write(reinterpret_cast<const char*>(t.u8.data()),
                 static_cast<std::streamsize>(t.u8.size()));
        break;
      case Tensor::DType::F64:
        for (double v : t.f64) binio::put_f64(os, v);
        break;
    }
  }
  require(os.good(), "write failed for '" + path + "'");
}

TensorTable read_tensor_table(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open '" + path + "'");
  char magic[4] = {};
  is.read(magic, 4);
  require(is.gcount() == 4 && std::equal(magic, magic + 4, kMagic),
          "'" + path + "': bad checkpoint magic");
  const std::uint32_t version = binio::get_u32(is, "version");
  require(version == kCheckpointVersion,
          "'" + path + "': unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t count = binio::get_u64(is, "tensor count");

  TensorTable table;
  for (std::uint64_t i = 0; i < count; ++i) {
    Tensor t;
    const std::uint16_t name_len = binio::get_u16(is, "name length");
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    require(is.gcount() == name_len, "truncated tensor name");
    const std::uint8_t dtype = binio::get_u8(is, "dtype");
    require(dtype <= 2, "tensor " + t.name + ": unknown dtype " + std::to_string(dtype));
    t.dtype = static_cast<Tensor::DType>(dtype);
    const std::uint32_t rank = binio::get_u32(is, "rank");
    t.dims.resize(rank);
    for (auto& d : t.dims) d = binio::get_u64(is, "dim");
    const std::uint64_t n = t.element_count();
    switch (t.dtype) {
      case Tensor::DType::F32:
        t.f32.resize(n);
        for (auto& v : t.f32) v = binio::get_f32(is, t.name);
        break;
      case Tensor::DType::U8: {
        t.u8.resize(n);
        is.read(reinterpret_cast<char*>(t.u8.data()), static_cast<std::streamsize>(n));
        require(static_cast<std::uint64_t>(is.gcount()) == n, "truncated tensor " + t.name);
        break;
      }
      case Tensor::DType::F64:
        t.f64.resize(n);
        for (auto& v : t.f64) v = binio::get_f64(is, t.name);
        break;
    }
    table.add(std::move(t));
  }
  return table;
}

}  // namespace mmagg
