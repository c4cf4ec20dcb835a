#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sargtr/model.hpp"

namespace sargtr {

// Checkpoint layout: "SGTRCKPT" magic, u32 version, length-prefixed config
// JSON, then per named parameter a length-prefixed name, rows, cols and the
// raw little-endian doubles. Round trip is bit-exact.
inline constexpr char kCheckpointMagic[8] = {'S', 'G', 'T', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ModelParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u32(os, kCheckpointVersion);

  const std::string cfg_json = to_json(cfg).dump();
  detail::write_u64(os, cfg_json.size());
  os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));

  auto named = named_params(const_cast<ModelParams&>(params));
  detail::write_u64(os, named.size());
  for (const auto& [name, tensor] : named) {
    detail::write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u64(os, tensor->rows());
    detail::write_u64(os, tensor->cols());
    for (std::size_t i = 0; i < tensor->size(); ++i) detail::write_f64(os, (*tensor)[i]);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
    throw std::runtime_error("load_checkpoint: bad magic");
  if (detail::read_u32(is) != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version");

  auto read_len = [&is](const char* what) {
    const std::uint64_t len = detail::read_u64(is);
    if (!is || len > (1ull << 30))
      throw std::runtime_error(std::string("load_checkpoint: bad ") + what);
    return len;
  };

  const std::uint64_t json_len = read_len("config length");
  std::string cfg_json(json_len, '\0');
  is.read(cfg_json.data(), static_cast<std::streamsize>(json_len));
  if (!is) throw std::runtime_error("load_checkpoint: truncated config");
  ModelConfig cfg = model_config_from_json(nlohmann::json::parse(cfg_json));

  ModelParams params = make_params_layout(cfg);
  auto named = named_params(params);
  const std::uint64_t entries = detail::read_u64(is);
  if (!is || entries != named.size())
    throw std::runtime_error("load_checkpoint: parameter count mismatch");
  for (std::uint64_t e = 0; e < entries; ++e) {
    const std::uint64_t name_len = read_len("name length");
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!is || name != named[e].first)
      throw std::runtime_error("load_checkpoint: unexpected parameter " + name);
    Tensor& t = *named[e].second;
    const std::uint64_t rows = detail::read_u64(is);
    const std::uint64_t cols = detail::read_u64(is);
    if (rows != t.rows() || cols != t.cols())
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = detail::read_f64(is);
  }
  if (!is) throw std::runtime_error("load_checkpoint: truncated file");
  return {cfg, std::move(params)};
}

}  // namespace sargtr
