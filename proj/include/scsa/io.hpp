#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "scsa/param.hpp"
#include "scsa/tensor.hpp"

namespace scsa {

// Binary tensor dump, the cross-implementation oracle format:
//   magic "SCST", u8 rank, u8 dtype (0 = f64, 1 = f32),
//   rank x u32 little-endian extents, row-major little-endian payload.
enum class DType : std::uint8_t { F64 = 0, F32 = 1 };

void save_tensor(std::ostream& os, const Tensor& t);
void save_tensor_f32(std::ostream& os, const TensorF& t);

struct LoadedTensor {
    Shape shape;
    DType stored_dtype = DType::F64;
    Tensor values;  // f32 payloads are widened on load
};

LoadedTensor load_tensor(std::istream& is);

// Checkpoint container: u32 entry count, then per entry a u16 name length,
// UTF-8 name bytes, and one tensor dump block. Parameters first, then
// buffers (running statistics), both in store insertion order.
void save_checkpoint(const std::string& path, const ParamStore& store);

struct CheckpointEntry {
    std::string name;
    LoadedTensor tensor;
};

std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

// Restores parameter values (and buffers) by name; unknown names in the
// file or missing names in the store are errors.
void restore_checkpoint(const std::string& path, ParamStore& store);

}  // namespace scsa
