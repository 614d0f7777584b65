#include "fpn/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "fpn/binary_io.hpp"

namespace fpn {

namespace {
constexpr char kMagic[8] = {'F', 'P', 'N', 'C', 'K', 'P', 'T', '\0'};
}

void save_checkpoint(const std::filesystem::path& path, const NleParameters& theta) {
  const auto layout = parameter_layout(theta.shape);
  require(theta.values.size() == parameter_count(theta.shape), "checkpoint: parameter size mismatch");
  nlohmann::json manifest;
  manifest["format"] = "fpn-nle";
  manifest["version"] = kCheckpointVersion;
  manifest["width"] = theta.shape.width;
  manifest["blocks"] = theta.shape.blocks;
  manifest["subarrays"] = theta.shape.subarrays;
  manifest["side"] = theta.shape.side;
  manifest["skip"] = theta.shape.skip;
  for (const auto& t : layout) manifest["tensors"].push_back({{"name", t.name}, {"shape", t.dims}});

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
  os.write(kMagic, sizeof kMagic);
  io::put_string(os, manifest.dump());
  for (const auto& t : layout) {
    io::put_string(os, t.name);
    io::put_le<std::uint64_t>(os, t.size);
    for (std::size_t i = 0; i < t.size; ++i) io::put_f32(os, theta.values[t.offset + i]);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

NleParameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint not found: " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  require(is && std::equal(magic, magic + 8, kMagic), "checkpoint: bad magic in " + path.string());
  const auto manifest = nlohmann::json::parse(io::get_string(is));
  require(manifest.at("format") == "fpn-nle", "checkpoint: unknown format");
  require(manifest.at("version").get<int>() == kCheckpointVersion, "checkpoint: unsupported version");

  NleParameters theta;
  theta.shape.width = manifest.at("width").get<int>();
  theta.shape.blocks = manifest.at("blocks").get<int>();
  theta.shape.subarrays = manifest.at("subarrays").get<int>();
  theta.shape.side = manifest.at("side").get<int>();
  theta.shape.skip = manifest.at("skip").get<double>();
  const auto layout = parameter_layout(theta.shape);
  const auto& tensors = manifest.at("tensors");
  require(tensors.size() == layout.size(), "checkpoint: tensor count does not match architecture");
  theta.values.assign(parameter_count(theta.shape), 0.0);
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto& t = layout[k];
    require(tensors[k].at("name") == t.name, "checkpoint: unexpected tensor " +
                                                 tensors[k].at("name").get<std::string>());
    require(tensors[k].at("shape").get<std::vector<int>>() == t.dims,
            "checkpoint: shape mismatch for " + t.name);
    require(io::get_string(is) == t.name, "checkpoint: blob name mismatch for " + t.name);
    require(io::get_le<std::uint64_t>(is) == t.size, "checkpoint: blob size mismatch for " + t.name);
    for (std::size_t i = 0; i < t.size; ++i) theta.values[t.offset + i] = io::get_f32(is);
  }
  return theta;
}

}  // namespace fpn
