#pragma once

#include <string>
#include <vector>

#include "xseg/tensor.hpp"

namespace xseg {

// Checkpoint container shared by the model ("SEGM") and the pair classifier
// ("P4RN"): 4-byte magic, u32-le tensor count, then per tensor a shape header
// (u32-le ndims, u32-le dims...) and float32-le payload. Values round to f32
// on write.
void write_blob(const std::string& path, const char magic[4],
                const std::vector<const Tensor*>& tensors,
                const std::vector<std::vector<uint32_t>>& dims);

// Reads payloads into the provided tensors, validating the declared dims
// against each tensor's element count.
void read_blob(const std::string& path, const char magic[4],
               const std::vector<Tensor*>& tensors,
               const std::vector<std::vector<uint32_t>>& dims);

}  // namespace xseg
