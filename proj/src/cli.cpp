#include "ucd/cli.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ucd/checkpoint.hpp"
#include "ucd/errors.hpp"
#include "ucd/probe.hpp"
#include "ucd/tabular.hpp"
#include "ucd/trainer.hpp"

namespace ucd::cli {

using Json = nlohmann::ordered_json;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

void check_compatible(const Checkpoint& ckpt, const Dataset& data, const std::filesystem::path& path) {
  if (ckpt.discriminator.cond().cardinality != data.n_classes()) {
    throw ConfigError(path.string() + ": checkpoint has " + std::to_string(ckpt.discriminator.cond().cardinality) +
                      " classes, dataset has " + std::to_string(data.n_classes()));
  }
  if (ckpt.discriminator.input_dim() != data.dim()) {
    throw ConfigError(path.string() + ": checkpoint expects " + std::to_string(ckpt.discriminator.input_dim()) +
                      "-d samples, dataset has dimension " + std::to_string(data.dim()));
  }
}

std::string cell_name(const std::vector<std::pair<std::string, std::string>>& cell, std::uint64_t seed) {
  std::string name;
  for (const auto& [k, v] : cell) name += k + "=" + v + "_";
  return name + "seed=" + std::to_string(seed);
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

TrainConfig resolve_config(const ConfigArgs& args) {
  std::vector<ConfigEntry> entries;
  if (args.config) entries = read_config_file(*args.config);
  for (const auto& o : args.overrides) entries.push_back(parse_override(o));
  if (args.seed) entries.push_back({"seed", std::to_string(*args.seed), "--seed"});
  return build_config(entries);
}

int cmd_train(const ConfigArgs& args, const std::filesystem::path& outdir, std::ostream& out) {
  const TrainConfig cfg = resolve_config(args);
  const TrainReport report = run_training(cfg, outdir);
  out << "variant " << to_string(cfg.variant) << " seed " << cfg.seed << ": " << report.steps << " steps";
  if (!report.probes.empty()) out << ", probe top-1 " << report.probes.back().top(1);
  if (report.final_metrics) out << ", frechet " << report.final_metrics->frechet_pooled;
  out << "\nlog " << report.log_path.string() << "\ncheckpoint " << report.checkpoint_path.string() << "\n";
  return kExitOk;
}

GridAxis parse_grid(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--grid " + text + ": expected KEY=v1,v2,...");
  GridAxis axis{text.substr(0, eq), split(text.substr(eq + 1), ',')};
  const auto keys = config_keys();
  if (std::find(keys.begin(), keys.end(), axis.key) == keys.end()) {
    throw ConfigError("--grid: unknown key '" + axis.key + "'");
  }
  if (axis.values.empty()) throw ConfigError("--grid " + text + ": no values");
  return axis;
}

int cmd_ablate(const ConfigArgs& args, const std::vector<GridAxis>& grid, const std::vector<std::uint64_t>& seeds,
               const std::filesystem::path& outdir, std::ostream& out, bool resume) {
  if (grid.empty()) throw ConfigError("ablate: empty grid");
  if (seeds.empty()) throw ConfigError("ablate: empty seed list");
  std::vector<std::vector<std::pair<std::string, std::string>>> cells{{}};
  for (const auto& axis : grid) {
    if (axis.values.empty()) throw ConfigError("ablate: grid axis '" + axis.key + "' has no values");
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& cell : cells) {
      for (const auto& v : axis.values) {
        auto c = cell;
        c.emplace_back(axis.key, v);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  // Resolve every cell before running any, so a bad value fails fast.
  std::vector<std::pair<TrainConfig, std::string>> runs;
  for (const auto& cell : cells) {
    for (std::uint64_t seed : seeds) {
      ConfigArgs a = args;
      for (const auto& [k, v] : cell) a.overrides.push_back(k + "=" + v);
      a.seed = seed;
      runs.emplace_back(resolve_config(a), cell_name(cell, seed));
    }
  }
  std::filesystem::create_directories(outdir);
  auto csv = open_out(outdir / "ablation.csv");
  csv << "lambda1,lambda2,frechet_pooled,probe_top1,seed\n";
  for (const auto& [cfg, name] : runs) {
    std::optional<TrainReport> previous = resume ? load_finished_run(cfg, outdir / name) : std::nullopt;
    if (previous) out << name << ": reusing finished run\n";
    const TrainReport report = previous ? std::move(*previous) : run_training(cfg, outdir / name);
    const double fd = report.final_metrics ? report.final_metrics->frechet_pooled : std::nan("");
    const double top1 = report.probes.empty() ? std::nan("") : report.probes.back().top(1);
    csv << csv_number(cfg.weights.lambda1) << ',' << csv_number(cfg.weights.lambda2) << ',' << csv_number(fd) << ','
        << csv_number(top1) << ',' << cfg.seed << '\n';
    csv.flush();
    out << name << ": frechet " << fd << ", probe top-1 " << top1 << "\n";
  }
  return kExitOk;
}

int cmd_oracle(const OracleArgs& args, std::ostream& out) {
  std::vector<TabularGame> games;
  if (args.games_dir) {
    if (!std::filesystem::is_directory(*args.games_dir)) throw ConfigError(args.games_dir->string() + ": not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(*args.games_dir)) {
      if (e.path().extension() == ".game") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError(args.games_dir->string() + ": no .game files");
    for (const auto& f : files) games.push_back(load_game_file(f));
  } else {
    games = builtin_suite(args.random_games, args.seed);
  }
  const auto lambdas = default_lambda_grid();
  const Theorem1Report report = verify_theorem1(games, lambdas);

  std::filesystem::create_directories(args.outdir);
  auto jsonl = open_out(args.outdir / "oracle.jsonl");
  for (const auto& r : report.rows) {
    Json j;
    j["kind"] = "optimum";
    j["game"] = r.game;
    j["lambda1"] = r.lambda1;
    j["max_deviation"] = r.max_deviation;
    j["vanilla_max_deviation"] = r.vanilla_max_deviation;
    j["max_off_label_mass"] = r.max_off_label_mass;
    j["grad_norm"] = r.grad_norm;
    j["iterations"] = r.iterations;
    j["passed"] = r.passed;
    Json cells = Json::array();
    for (const auto& c : r.offending) {
      cells.push_back({{"point", c.point}, {"class", c.cls}, {"optimized", c.optimized}, {"closed_form", c.closed_form}});
    }
    j["offending"] = cells;
    jsonl << j.dump() << '\n';
    if (!r.passed) {
      out << "FAIL " << r.game << " lambda1=" << r.lambda1 << " max deviation " << r.max_deviation
          << " (vanilla " << r.vanilla_max_deviation << ")\n";
      for (const auto& c : r.offending) {
        out << "  x=" << c.point << " c=" << c.cls << " optimized " << c.optimized << " closed form " << c.closed_form
            << "\n";
      }
    }
  }
  for (const auto& c : report.classifier) {
    jsonl << Json{{"kind", "classifier"}, {"game", c.game}, {"accuracy", c.accuracy}, {"asserted", c.asserted},
                  {"passed", c.passed}}
                 .dump()
          << '\n';
    if (!c.passed) out << "FAIL classifier property on " << c.game << ": accuracy " << c.accuracy << "\n";
  }
  double worst = 0.0;
  double worst_spread = 0.0;
  for (const auto& r : report.rows) worst = std::max(worst, r.max_deviation);
  for (const auto& [game, spread] : report.lambda_spread) {
    jsonl << Json{{"kind", "lambda_spread"}, {"game", game}, {"spread", spread}}.dump() << '\n';
    worst_spread = std::max(worst_spread, spread);
    if (spread >= report.tolerance) out << "FAIL lambda spread on " << game << ": " << spread << "\n";
  }
  const bool ok = report.passed();
  jsonl << Json{{"kind", "summary"}, {"games", games.size()}, {"rows", report.rows.size()},
                {"max_deviation", worst}, {"max_lambda_spread", worst_spread}, {"passed", ok}}
               .dump()
        << '\n';
  out << (ok ? "PASS" : "FAIL") << ": " << games.size() << " games x " << lambdas.size()
      << " lambda values, max deviation " << worst << " (tolerance " << report.tolerance << ")\n";
  return ok ? kExitOk : kExitFailure;
}

namespace {

struct LoadedProbeInputs {
  Checkpoint ckpt;
  TrainConfig cfg;
  Dataset data;
};

LoadedProbeInputs load_probe_inputs(const ProbeArgs& args) {
  Checkpoint ckpt = load_checkpoint(args.checkpoint);
  TrainConfig cfg = resolve_config(args.data);
  Dataset data(cfg.data);
  check_compatible(ckpt, data, args.checkpoint);
  return {std::move(ckpt), std::move(cfg), std::move(data)};
}

}  // namespace

int cmd_probe(const ProbeArgs& args, std::ostream& out) {
  const auto in = load_probe_inputs(args);
  for (std::size_t k : args.ks) {
    if (k == 0 || k > in.data.n_classes()) throw ConfigError("--ks: k=" + std::to_string(k) + " outside [1, classes]");
  }
  if (args.samples == 0) throw ConfigError("--samples must be positive");
  Rng rng = make_stream(in.cfg.seed, streams::probe);
  const LabeledBatch samples = in.data.sample_labeled(args.samples, rng);
  const ProbeReport report = probe_discriminator(in.ckpt.discriminator, samples, args.ks);
  Json j;
  j["checkpoint"] = args.checkpoint.string();
  j["kind"] = to_string(report.kind);
  j["n_samples"] = report.n_samples;
  for (const auto& [k, acc] : report.top_k_accuracy) {
    j["probe_top" + std::to_string(k)] = acc;
    out << "top-" << k << " " << acc << "\n";
  }
  std::filesystem::create_directories(args.outdir);
  open_out(args.outdir / "probe.jsonl") << j.dump() << '\n';
  return kExitOk;
}

int cmd_eval(const ProbeArgs& args, std::ostream& out) {
  const auto in = load_probe_inputs(args);
  Rng rng = make_stream(in.cfg.seed, streams::metrics);
  const EvalMetrics m = evaluate_generator(in.ckpt.generator, in.data, in.cfg.metrics, rng);
  Json j;
  j["checkpoint"] = args.checkpoint.string();
  j["frechet_pooled"] = m.frechet_pooled;
  j["frechet_per_class"] = m.frechet_per_class;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  if (m.modes_covered) j["modes_covered"] = *m.modes_covered;
  std::filesystem::create_directories(args.outdir);
  open_out(args.outdir / "eval.jsonl") << j.dump() << '\n';
  out << j.dump(2) << "\n";
  return kExitOk;
}

std::vector<std::string> log_fields() {
  return {"g_loss",         "d_loss",    "class_loss", "dino_loss", "probe_top1",    "probe_top3", "frechet_pooled",
          "frechet_per_class", "precision", "recall",     "modes_covered", "iter_ms"};
}

int cmd_export_plot(const std::filesystem::path& log, const std::vector<std::string>& fields,
                    const std::filesystem::path& csv, std::ostream& out) {
  if (fields.empty()) throw ConfigError("--fields: no fields given");
  const auto valid = log_fields();
  for (const auto& f : fields) {
    if (std::find(valid.begin(), valid.end(), f) == valid.end()) {
      std::string list;
      for (const auto& v : valid) list += (list.empty() ? "" : ", ") + v;
      throw ConfigError("--fields: unknown field '" + f + "'; valid fields: " + list);
    }
  }
  std::ifstream in(log);
  if (!in) throw ConfigError(log.string() + ": cannot open log");
  auto o = open_out(csv);
  o << "step";
  for (const auto& f : fields) o << ',' << f;
  o << '\n';
  std::string line;
  std::size_t lineno = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ConfigError(log.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("step")) continue;
    bool complete = true;
    for (const auto& f : fields) complete = complete && j.contains(f) && !j[f].is_null();
    if (!complete) continue;
    o << j["step"].dump();
    for (const auto& f : fields) {
      o << ',';
      if (j[f].is_array()) {
        for (std::size_t i = 0; i < j[f].size(); ++i) o << (i ? ";" : "") << j[f][i].dump();
      } else {
        o << j[f].dump();
      }
    }
    o << '\n';
    ++rows;
  }
  out << rows << " rows written to " << csv.string() << "\n";
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional GAN lab: unconditional discriminators, probes and the tabular oracle"};
  app.require_subcommand(1);

  ConfigArgs cfg_args;
  std::string outdir = "runs/latest";
  auto add_config_flags = [&](CLI::App* sub) {
    sub->add_option("--config", cfg_args.config, "Config file (key = value)");
    sub->add_option("--set", cfg_args.overrides, "Override KEY=VALUE (repeatable)");
    sub->add_option("--seed", cfg_args.seed, "Run seed");
  };

  auto* train = app.add_subcommand("train", "Train one configuration");
  add_config_flags(train);
  train->add_option("--out", outdir, "Output directory");

  std::vector<std::string> grid_specs;
  std::string seed_list = "0";
  auto* ablate = app.add_subcommand("ablate", "Run a lambda grid");
  add_config_flags(ablate);
  ablate->add_option("--grid", grid_specs, "KEY=v1,v2,... (repeatable; cross product)");
  ablate->add_option("--seeds", seed_list, "Comma-separated seeds per cell");
  ablate->add_option("--out", outdir, "Output directory");
  bool resume = false;
  ablate->add_flag("--resume", resume, "Reuse cells that already hold a finished run of the same config");

  OracleArgs oracle_args;
  std::string games_dir;
  auto* oracle = app.add_subcommand("oracle", "Check the tabular optimum against q / (q + p_g)");
  oracle->add_option("--games", games_dir, "Directory of .game files (builtin suite when absent)");
  oracle->add_option("--random-games", oracle_args.random_games, "Random games in the builtin suite");
  oracle->add_option("--seed", oracle_args.seed, "Seed of the builtin suite");
  oracle->add_option("--out", outdir, "Output directory");

  ProbeArgs probe_args;
  std::string ks = "1,3";
  std::string checkpoint;
  auto* probe = app.add_subcommand("probe", "Probe a saved discriminator");
  auto* eval = app.add_subcommand("eval", "Sample metrics of a saved generator");
  for (auto* sub : {probe, eval}) {
    add_config_flags(sub);
    sub->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    sub->add_option("--out", outdir, "Output directory");
  }
  probe->add_option("--ks", ks, "Comma-separated k values");
  probe->add_option("--samples", probe_args.samples, "Probe samples");

  std::string log_path;
  std::string fields;
  std::string csv_path = "plot.csv";
  auto* export_plot = app.add_subcommand("export-plot", "Export log fields as CSV");
  export_plot->add_option("--log", log_path, "Run log (JSONL)")->required();
  export_plot->add_option("--fields", fields, "Comma-separated field names")->required();
  export_plot->add_option("--out", csv_path, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(cfg_args, outdir, out);
    if (*ablate) {
      std::vector<GridAxis> grid;
      for (const auto& g : grid_specs) grid.push_back(parse_grid(g));
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split(seed_list, ',')) {
        try {
          seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw ConfigError("--seeds: bad seed '" + s + "'");
        }
      }
      return cmd_ablate(cfg_args, grid, seeds, outdir, out, resume);
    }
    if (*oracle) {
      if (!games_dir.empty()) oracle_args.games_dir = games_dir;
      oracle_args.outdir = outdir;
      return cmd_oracle(oracle_args, out);
    }
    if (*probe || *eval) {
      probe_args.checkpoint = checkpoint;
      probe_args.data = cfg_args;
      probe_args.outdir = outdir;
      probe_args.ks.clear();
      for (const auto& k : split(ks, ',')) {
        try {
          probe_args.ks.push_back(std::stoull(k));
        } catch (const std::exception&) {
          throw ConfigError("--ks: bad value '" + k + "'");
        }
      }
      return *probe ? cmd_probe(probe_args, out) : cmd_eval(probe_args, out);
    }
    if (*export_plot) return cmd_export_plot(log_path, split(fields, ','), csv_path, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingDiverged& e) {
    err << "diverged: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ucd::cli
