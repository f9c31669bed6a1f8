#include "frforge/numeric/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"

namespace frforge::numeric {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

std::string file_name(const std::string& tensor) { return tensor + ".bin"; }

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params, std::int64_t step,
                     const Json& extra) {
  std::filesystem::create_directories(dir);
  OrderedJson manifest;
  manifest["schema_version"] = 1;
  manifest["dtype"] = "float32";
  manifest["byte_order"] = "little";
  manifest["seed"] = params.seed();
  manifest["step"] = step;
  manifest["tensors"] = OrderedJson::array();
  for (const auto& [name, t] : params) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape}, {"file", file_name(name)}});
    write_text_file(dir / file_name(name),
                    std::string_view(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(float)));
  }
  manifest["extra"] = extra;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw ConfigError("no checkpoint manifest at " + manifest_path.string());
  Json manifest;
  try {
    manifest = Json::parse(read_text_file(manifest_path));
  } catch (const Json::parse_error& e) {
    throw ParseError(manifest_path.string(), 1, e.what());
  }
  try {
    if (manifest.at("schema_version").get<int>() != 1) throw ConfigError("unsupported checkpoint schema");
    if (manifest.at("dtype").get<std::string>() != "float32") throw ConfigError("unsupported checkpoint dtype");
    Checkpoint ck;
    ck.params.set_seed(manifest.at("seed").get<std::uint64_t>());
    ck.step = manifest.at("step").get<std::int64_t>();
    if (manifest.contains("extra")) ck.extra = manifest.at("extra");
    for (const auto& tj : manifest.at("tensors")) {
      Tensor t;
      t.shape = tj.at("shape").get<std::vector<std::size_t>>();
      const auto bytes = read_text_file(dir / tj.at("file").get<std::string>());
      std::size_t n = 1;
      for (auto d : t.shape) n *= d;
      if (bytes.size() != n * sizeof(float)) {
        throw ParseError((dir / tj.at("file").get<std::string>()).string(), 1, "tensor byte size mismatch");
      }
      t.values.resize(n);
      std::memcpy(t.values.data(), bytes.data(), bytes.size());
      ck.params.set(tj.at("name").get<std::string>(), std::move(t));
    }
    return ck;
  } catch (const Json::exception& e) {
    throw ParseError(manifest_path.string(), 1, e.what());
  }
}

std::uint64_t checkpoint_digest(const std::filesystem::path& dir) {
  const auto manifest_text = read_text_file(dir / "manifest.json");
  std::uint64_t h = fnv1a64(manifest_text);
  const auto manifest = Json::parse(manifest_text);
  for (const auto& tj : manifest.at("tensors")) h = fnv1a64(read_text_file(dir / tj.at("file").get<std::string>()), h);
  return h;
}

}  // namespace frforge::numeric
