#pragma once

// Binary checkpoint format (all integers and floats little-endian):
//
//   magic   "MNAVCKPT" (8 bytes)
//   version u32 = 1
//   config  i32 vocab_size, i32 context_len, i32 d_model, i32 n_heads,
//           i32 n_layers, u64 seed
//   count   u32 number of parameter blobs
//   blob*   u32 name length, name bytes, u32 ndim, u64 dims[ndim],
//           f64 data[prod(dims)]
//
// Optimizer state uses the same blob encoding under magic "MNAVADAM",
// followed by version, an i64 step counter and blobs "m.<param>" /
// "v.<param>".

#include <filesystem>
#include <string>
#include <string_view>

#include "mapnav/tensor/optim.hpp"
#include "mapnav/tensor/transformer.hpp"

namespace mapnav::tensor {

std::string serialize_model(const Model& model);
Model deserialize_model(std::string_view bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

std::string serialize_optimizer(const Adam& adam);
Adam deserialize_optimizer(std::string_view bytes);

void save_optimizer(const Adam& adam, const std::filesystem::path& path);
Adam load_optimizer(const std::filesystem::path& path);

}  // namespace mapnav::tensor
