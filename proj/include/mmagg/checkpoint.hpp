#pragma once

#include "mmagg/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmagg {

// Named-tensor table, the single persistence format for model checkpoints,
// optimizer state and preprocessing models.
//
// Layout (little-endian): magic "MMCK", version u32, tensor count u64, then
// per tensor: name length u16, name bytes, dtype u8, rank u32, dims (u64
// each), payload. dtype 0 = 32-bit real, 1 = raw bytes, 2 = 64-bit real.
struct Tensor {
  enum class DType : std::uint8_t { F32 = 0, U8 = 1, F64 = 2 };

  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint64_t> dims;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;
  std::vector<double> f64;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  static Tensor from_f32(std::string name, std::vector<std::uint64_t> dims,
                         std::vector<float> data);
  static Tensor from_f64(std::string name, std::vector<std::uint64_t> dims,
                         std::vector<double> data);
  static Tensor from_bytes(std::string name, std::vector<std::uint8_t> data);
  static Tensor scalar_f64(std::string name, double value);
};

struct TensorTable {
  std::vector<Tensor> tensors;

  const Tensor& get(const std::string& name) const;
  const Tensor* find(const std::string& name) const;
  void add(Tensor t);
};

void write_tensor_table(const TensorTable& table, const std::string& path);
TensorTable read_tensor_table(const std::string& path);

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace mmagg
