#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "se/generator.hpp"

namespace se {

// Checkpoint container: little-endian, magic + version, a kind tag, a
// key=value config text block, then named f64 tensors (name, shape, raw
// values). Values are stored as f64 regardless of the working precision.
inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'C', 'K', 'P', 'T', '0', '0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  SE_CHECK(in.good(), "truncated checkpoint ", path);
  return v;
}

inline void write_string(std::ofstream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::ifstream& in, const std::string& path) {
  const auto len = read_pod<std::uint32_t>(in, path);
  SE_CHECK(len <= (1u << 24), "unreasonable string length ", len, " in checkpoint ", path);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  SE_CHECK(in.good(), "truncated checkpoint ", path);
  return s;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const std::string& kind,
                     const std::string& config_text, const std::vector<NamedParam<S>>& params) {
  std::ofstream out(path, std::ios::binary);
  SE_CHECK(out.good(), "cannot write checkpoint ", path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
  detail::write_string(out, kind);
  detail::write_string(out, config_text);
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const NamedParam<S>& p : params) {
    detail::write_string(out, p.name);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor->rank()));
    for (int d = 0; d < p.tensor->rank(); ++d) {
      detail::write_pod<std::int64_t>(out, p.tensor->dim(d));
    }
    for (Index i = 0; i < p.tensor->size(); ++i) {
      detail::write_pod<double>(out, static_cast<double>(p.tensor->data()[i]));
    }
  }
  SE_CHECK(out.good(), "write failed for checkpoint ", path);
}

struct RawCheckpoint {
  std::string kind;
  std::string config_text;
  std::vector<std::pair<std::string, Tensor<double>>> tensors;

  const Tensor<double>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return &t;
    }
    return nullptr;
  }
};

inline RawCheckpoint load_raw_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  SE_CHECK(in.good(), "cannot read checkpoint ", path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  SE_CHECK(in.good() && std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0,
           "not a checkpoint file: ", path);
  const auto version = detail::read_pod<std::uint32_t>(in, path);
  SE_CHECK(version == kCheckpointVersion, "checkpoint ", path, " has version ", version,
           ", expected ", kCheckpointVersion);
  RawCheckpoint ckpt;
  ckpt.kind = detail::read_string(in, path);
  ckpt.config_text = detail::read_string(in, path);
  const auto count = detail::read_pod<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = detail::read_string(in, path);
    const auto rank = detail::read_pod<std::uint32_t>(in, path);
    SE_CHECK(rank >= 1 && rank <= 8, "tensor ", name, " in ", path, " has rank ", rank);
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(detail::read_pod<std::int64_t>(in, path));
    }
    Tensor<double> t(shape);
    for (Index j = 0; j < t.size(); ++j) t.data()[j] = detail::read_pod<double>(in, path);
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  return ckpt;
}

// Copies checkpoint tensors into an existing parameter set; the name sets
// must match exactly and every shape must agree.
template <typename S>
void load_into(const RawCheckpoint& ckpt, const std::vector<NamedParam<S>>& params,
               const std::string& path) {
  SE_CHECK(ckpt.tensors.size() == params.size(), "checkpoint ", path, " holds ",
           ckpt.tensors.size(), " tensors, model expects ", params.size());
  for (const NamedParam<S>& p : params) {
    const Tensor<double>* src = ckpt.find(p.name);
    SE_CHECK(src != nullptr, "checkpoint ", path, " is missing tensor ", p.name);
    SE_CHECK(src->shape() == p.tensor->shape(), "checkpoint tensor ", p.name, " has shape ",
             shape_str(src->shape()), ", model expects ", shape_str(p.tensor->shape()));
    for (Index i = 0; i < src->size(); ++i) {
      p.tensor->data()[i] = static_cast<S>(src->data()[i]);
    }
  }
}

inline std::string trim_ws(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

// key=value lines, whitespace around either side ignored; blank lines and
// # comments are skipped.
inline std::map<std::string, std::string> parse_kv_lines(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = trim_ws(line);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    SE_CHECK(eq != std::string::npos, "config line without '=': ", line);
    kv[trim_ws(line.substr(0, eq))] = trim_ws(line.substr(eq + 1));
  }
  return kv;
}

inline std::string generator_config_to_text(const GeneratorConfig& cfg) {
  std::string conv;
  for (std::size_t i = 0; i < cfg.conv_frontend.size(); ++i) {
    const ConvSpec& c = cfg.conv_frontend[i];
    if (i > 0) conv += ",";
    conv += str_cat(c.out_channels, ":", c.kernel_size, ":", c.stride);
  }
  return str_cat("n_blocks=", cfg.n_blocks, "\n", "d_model=", cfg.d_model, "\n",
                 "n_heads=", cfg.n_heads, "\n", "d_k=", cfg.d_k, "\n", "d_ff=", cfg.d_ff, "\n",
                 "conv_frontend=", conv, "\n", "n_bins=", cfg.n_bins, "\n",
                 "head_mode=", head_mode_name(cfg.head_mode), "\n",
                 "sinusoidal_pe=", cfg.sinusoidal_pe ? 1 : 0, "\n", "ln_eps=", cfg.ln_eps, "\n");
}

inline std::vector<ConvSpec> parse_conv_frontend(const std::string& text) {
  std::vector<ConvSpec> specs;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) break;
    const std::size_t c1 = item.find(':');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : item.find(':', c1 + 1);
    SE_CHECK(c1 != std::string::npos && c2 != std::string::npos,
             "conv front-end entry must be out:kernel:stride, got ", item);
    ConvSpec spec;
    spec.out_channels = std::stoll(item.substr(0, c1));
    spec.kernel_size = std::stoll(item.substr(c1 + 1, c2 - c1 - 1));
    spec.stride = std::stoll(item.substr(c2 + 1));
    specs.push_back(spec);
  }
  SE_CHECK(!specs.empty(), "empty conv front-end spec");
  return specs;
}

inline GeneratorConfig generator_config_from_text(const std::string& text) {
  const auto kv = parse_kv_lines(text);
  GeneratorConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "n_blocks") {
      cfg.n_blocks = std::stoll(value);
    } else if (key == "d_model") {
      cfg.d_model = std::stoll(value);
    } else if (key == "n_heads") {
      cfg.n_heads = std::stoll(value);
    } else if (key == "d_k") {
      cfg.d_k = std::stoll(value);
    } else if (key == "d_ff") {
      cfg.d_ff = std::stoll(value);
    } else if (key == "conv_frontend") {
      cfg.conv_frontend = parse_conv_frontend(value);
    } else if (key == "n_bins") {
      cfg.n_bins = std::stoll(value);
    } else if (key == "head_mode") {
      cfg.head_mode = parse_head_mode(value);
    } else if (key == "sinusoidal_pe") {
      cfg.sinusoidal_pe = value == "1" || value == "true";
    } else if (key == "ln_eps") {
      cfg.ln_eps = std::stod(value);
    } else {
      fail("unknown generator config key '", key, "'");
    }
  }
  cfg.validate();
  return cfg;
}

template <typename S>
void save_generator_checkpoint(const std::string& path, const GeneratorConfig& cfg,
                               GeneratorWeights<S>& weights) {
  save_checkpoint<S>(path, "generator", generator_config_to_text(cfg), weights.named_params());
}

template <typename S>
std::pair<GeneratorConfig, GeneratorWeights<S>> load_generator_checkpoint(
    const std::string& path) {
  const RawCheckpoint raw = load_raw_checkpoint(path);
  SE_CHECK(raw.kind == "generator", "checkpoint ", path, " holds a '", raw.kind,
           "', expected a generator");
  const GeneratorConfig cfg = generator_config_from_text(raw.config_text);
  Rng rng(0);
  GeneratorWeights<S> weights = GeneratorWeights<S>::init(cfg, rng);
  load_into(raw, weights.named_params(), path);
  return {cfg, std::move(weights)};
}

}  // namespace se
