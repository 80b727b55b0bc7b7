#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ucd/adam.hpp"
#include "ucd/data.hpp"
#include "ucd/losses.hpp"

namespace ucd {

enum class Variant { A, B, C };

const char* to_string(Variant v);
Variant parse_variant(const std::string& text);

struct ModelSettings {
  std::size_t latent_dim = 16;
  std::size_t embedding_dim = 16;
  std::size_t hidden = 256;
  std::size_t hidden_layers = 2;
  std::size_t feature_dim = 128;
};

struct ProbeSettings {
  std::size_t every = 500;  // 0 disables
  std::size_t samples = 2048;
  std::vector<std::size_t> ks{1, 3};
};

struct MetricSettings {
  std::size_t every = 0;  // 0: only after the last step
  std::size_t samples = 50000;
  std::size_t pr_samples = 5000;
  std::size_t pr_k = 3;
  double coverage_radius_sigmas = 3.0;
};

struct TrainConfig {
  Variant variant = Variant::C;
  std::uint64_t seed = 0;
  std::size_t steps = 20000;
  std::size_t batch_size = 256;
  GanLossKind gan_loss = GanLossKind::least_squares;
  ClassLossKind class_loss{};
  LossWeights weights{0.01, 0.1};
  double dino_temperature = 0.1;
  double dino_momentum = 0.9;
  AdamOptions g_optim{};
  AdamOptions d_optim{};
  ModelSettings model{};
  ProbeSettings probe{};
  MetricSettings metrics{};
  DatasetSpec data{};
  AugmentSpec augment{};
  std::size_t log_every = 100;
  bool wall_clock = true;

  // Variant defaults: A has no auxiliary terms, B uses lambda1 = 0.02,
  // C uses (lambda1, lambda2) = (0.01, 0.1).
  static TrainConfig defaults(Variant v);
  // Throws ConfigError on a broken invariant.
  void validate() const;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::string origin;  // "file:line" or "--set"
};

// "key = value" lines; '#' starts a comment; "[section]" prefixes later keys
// with "section.". Throws ConfigError with file:line on malformed lines.
std::vector<ConfigEntry> parse_config_entries(const std::string& text, const std::string& source);
std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path);
// "KEY=VALUE" from the command line.
ConfigEntry parse_override(const std::string& text);

// Starts from the defaults of the last "variant" entry (C when absent) and
// applies every entry in order. Unknown keys and bad values throw ConfigError
// naming the key and origin. The result is validated.
TrainConfig build_config(const std::vector<ConfigEntry>& entries);

// Every key the parser accepts, in the order used by resolved_config_text.
std::vector<std::string> config_keys();
// Full "key = value" listing of every effective setting; parsing it back
// yields the same config.
std::string resolved_config_text(const TrainConfig& cfg);

}  // namespace ucd
