#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ucd/config.hpp"

namespace ucd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct ConfigArgs {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

// Config file, then --set overrides in order, then --seed.
TrainConfig resolve_config(const ConfigArgs& args);

int cmd_train(const ConfigArgs& args, const std::filesystem::path& outdir, std::ostream& out);

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};
GridAxis parse_grid(const std::string& text);

// Cross product of the grid axes times the seed list. Writes one run
// directory per cell and ablation.csv with lambda1, lambda2, frechet_pooled,
// probe_top1, seed. With resume, cells whose directory already holds a
// finished run of the same config are read back instead of retrained.
int cmd_ablate(const ConfigArgs& args, const std::vector<GridAxis>& grid, const std::vector<std::uint64_t>& seeds,
               const std::filesystem::path& outdir, std::ostream& out, bool resume = false);

struct OracleArgs {
  std::optional<std::filesystem::path> games_dir;  // builtin suite when absent
  std::size_t random_games = 50;
  std::uint64_t seed = 2024;
  std::filesystem::path outdir = ".";
};
// Exit 0 iff every assertion holds. oracle.jsonl is written either way.
int cmd_oracle(const OracleArgs& args, std::ostream& out);

struct ProbeArgs {
  std::filesystem::path checkpoint;
  ConfigArgs data;
  std::vector<std::size_t> ks{1, 3};
  std::size_t samples = 10000;
  std::filesystem::path outdir = ".";
};
int cmd_probe(const ProbeArgs& args, std::ostream& out);
int cmd_eval(const ProbeArgs& args, std::ostream& out);

// CSV with a step column plus the requested fields; rows missing any field
// are skipped.
int cmd_export_plot(const std::filesystem::path& log, const std::vector<std::string>& fields,
                    const std::filesystem::path& csv, std::ostream& out);
// Field names accepted by export-plot.
std::vector<std::string> log_fields();

// Parses argv and dispatches; maps exceptions onto the exit-code contract.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ucd::cli
