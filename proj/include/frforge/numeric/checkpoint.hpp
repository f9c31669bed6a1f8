#pragma once

#include <cstdint>
#include <filesystem>

#include "frforge/common/io.hpp"
#include "frforge/numeric/tensor.hpp"

namespace frforge::numeric {

struct Checkpoint {
  ParamStore params;
  std::int64_t step = 0;
  Json extra = Json::object();
};

// Directory layout: manifest.json plus one raw little-endian float32 file per
// tensor (row-major). `extra` is stored verbatim under "extra".
void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params, std::int64_t step,
                     const Json& extra = Json::object());
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Digest over the manifest and every tensor file, in manifest order.
std::uint64_t checkpoint_digest(const std::filesystem::path& dir);

}  // namespace frforge::numeric
