// Versioned network checkpoint: JSON header (spec, seed, epoch) followed by
// the raw little-endian f64 parameter payload. Round-trips bit-exactly.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapinn/common.hpp"
#include "gapinn/network.hpp"

namespace gapinn {

struct Checkpoint {
  MlpSpec spec;
  ParamVector params;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'G', 'P', 'N', 'C', 'K', 'P', 'T', '\n'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  nlohmann::json header;
  header["input_dim"] = cp.spec.input_dim;
  header["hidden"] = cp.spec.hidden;
  header["output_dim"] = cp.spec.output_dim;
  header["output_activation"] =
      cp.spec.output_activation == OutputActivation::sigmoid ? "sigmoid" : "linear";
  header["seed"] = cp.seed;
  header["epoch"] = cp.epoch;
  header["param_count"] = cp.params.values.size();
  // explicit layout so the payload is self-describing
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& l : ParamLayout::of(cp.spec).layers) {
    layout.push_back({{"fan_in", l.fan_in},
                      {"fan_out", l.fan_out},
                      {"weights", l.weights},
                      {"biases", l.biases}});
  }
  header["layout"] = layout;
  std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(detail::kCheckpointMagic, 8);
  detail::put_u64_le(os, detail::kCheckpointVersion);
  detail::put_u64_le(os, hs.size());
  os.write(hs.data(), std::streamsize(hs.size()));
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(cp.params.values.data()),
             std::streamsize(cp.params.values.size() * sizeof(double)));
  } else {
    for (double d : cp.params.values) {
      std::uint64_t u;
      std::memcpy(&u, &d, 8);
      detail::put_u64_le(os, u);
    }
  }
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  std::uint64_t version = detail::get_u64_le(is);
  if (version != detail::kCheckpointVersion) {
    throw IoError("unsupported checkpoint version in " + path.string());
  }
  std::uint64_t hlen = detail::get_u64_le(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), std::streamsize(hlen));
  if (!is) throw IoError("truncated checkpoint header: " + path.string());
  nlohmann::json header = nlohmann::json::parse(hs);

  Checkpoint cp;
  cp.spec.input_dim = header.at("input_dim").get<int>();
  cp.spec.hidden = header.at("hidden").get<std::vector<int>>();
  cp.spec.output_dim = header.at("output_dim").get<int>();
  cp.spec.output_activation = header.at("output_activation").get<std::string>() == "sigmoid"
                                  ? OutputActivation::sigmoid
                                  : OutputActivation::linear;
  cp.seed = header.at("seed").get<std::uint64_t>();
  cp.epoch = header.at("epoch").get<std::int64_t>();
  std::size_t n = header.at("param_count").get<std::size_t>();
  cp.params.layout = ParamLayout::of(cp.spec);
  if (n != cp.params.layout.total) {
    throw IoError("checkpoint parameter count does not match its spec: " + path.string());
  }
  if (header.contains("layout")) {
    const auto& layers = header.at("layout");
    if (layers.size() != cp.params.layout.layers.size()) {
      throw IoError("checkpoint layout does not match its spec: " + path.string());
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& want = cp.params.layout.layers[l];
      if (layers[l].at("fan_in").get<int>() != want.fan_in ||
          layers[l].at("fan_out").get<int>() != want.fan_out ||
          layers[l].at("weights").get<std::size_t>() != want.weights ||
          layers[l].at("biases").get<std::size_t>() != want.biases) {
        throw IoError("checkpoint layout does not match its spec: " + path.string());
      }
    }
  }
  cp.params.values.resize(n);
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(cp.params.values.data()),
            std::streamsize(n * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t u = detail::get_u64_le(is);
      std::memcpy(&cp.params.values[i], &u, 8);
    }
  }
  if (!is) throw IoError("truncated checkpoint payload: " + path.string());
  return cp;
}

}  // namespace gapinn
