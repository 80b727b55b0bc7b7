#include "ucd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ucd/dino.hpp"
#include "ucd/errors.hpp"

namespace ucd {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::A: return "A";
    case Variant::B: return "B";
    case Variant::C: return "C";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  if (text == "A" || text == "a") return Variant::A;
  if (text == "B" || text == "b") return Variant::B;
  if (text == "C" || text == "c") return Variant::C;
  throw ConfigError("unknown variant '" + text + "' (expected A, B or C)");
}

TrainConfig TrainConfig::defaults(Variant v) {
  TrainConfig cfg;
  cfg.variant = v;
  switch (v) {
    case Variant::A: cfg.weights = {0.0, 0.0}; break;
    case Variant::B: cfg.weights = {0.02, 0.0}; break;
    case Variant::C: cfg.weights = {0.01, 0.1}; break;
  }
  return cfg;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (steps == 0) fail("steps must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(weights.lambda1 >= 0.0) || !(weights.lambda2 >= 0.0)) fail("loss weights must be non-negative");
  if (variant == Variant::A && (weights.lambda1 != 0.0 || weights.lambda2 != 0.0)) {
    fail("variant A has no classification or distillation term; loss.lambda1 and loss.lambda2 must be 0");
  }
  if (variant == Variant::B && weights.lambda2 != 0.0) fail("variant B requires loss.lambda2 = 0");
  for (const AdamOptions* o : {&g_optim, &d_optim}) {
    if (!(o->lr >= 0.0) || !(o->beta1 >= 0.0 && o->beta1 < 1.0) || !(o->beta2 >= 0.0 && o->beta2 < 1.0) || !(o->eps > 0.0)) {
      fail("optimizer settings out of range");
    }
  }
  if (model.latent_dim == 0 || model.embedding_dim == 0 || model.hidden == 0 || model.feature_dim == 0) {
    fail("model widths must be positive");
  }
  if (data.n_classes < 2) fail("data.classes must be at least 2");
  if (probe.every > 0 && probe.samples == 0) fail("probe.samples must be positive");
  for (std::size_t k : probe.ks) {
    if (k == 0 || k > data.n_classes) fail("probe.ks entries must lie in [1, data.classes]");
  }
  if (metrics.samples < 2 || metrics.pr_samples <= metrics.pr_k) fail("metric sample counts too small");
  if (!(metrics.coverage_radius_sigmas > 0.0)) fail("metrics.coverage_radius_sigmas must be positive");
  try {
    class_loss.validate();
    augment.validate();
    DinoState::initial(data.n_classes, dino_temperature, dino_momentum).validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_u64(trim(item)));
  if (out.empty()) throw ConfigError("expected a comma-separated list, got '" + v + "'");
  return out;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::string key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define UCD_DOUBLE(name, member)                                       \
  Field {                                                              \
    name, [](TrainConfig& c, const std::string& v) { c.member = to_double(v); }, \
        [](const TrainConfig& c) { return fmt_double(c.member); }      \
  }
#define UCD_SIZE(name, member)                                         \
  Field {                                                              \
    name, [](TrainConfig& c, const std::string& v) { c.member = to_u64(v); }, \
        [](const TrainConfig& c) { return std::to_string(c.member); }  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"variant", [](TrainConfig& c, const std::string& v) { c.variant = parse_variant(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.variant)); }},
      UCD_SIZE("seed", seed),
      UCD_SIZE("steps", steps),
      UCD_SIZE("batch_size", batch_size),
      Field{"loss.gan", [](TrainConfig& c, const std::string& v) { c.gan_loss = parse_gan_loss(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.gan_loss)); }},
      Field{"loss.class", [](TrainConfig& c, const std::string& v) { c.class_loss.variant = parse_class_loss(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.class_loss.variant)); }},
      UCD_DOUBLE("loss.hinge_margin", class_loss.margin),
      UCD_DOUBLE("loss.lambda1", weights.lambda1),
      UCD_DOUBLE("loss.lambda2", weights.lambda2),
      UCD_DOUBLE("dino.temperature", dino_temperature),
      UCD_DOUBLE("dino.momentum", dino_momentum),
      UCD_DOUBLE("optim.g.lr", g_optim.lr),
      UCD_DOUBLE("optim.g.beta1", g_optim.beta1),
      UCD_DOUBLE("optim.g.beta2", g_optim.beta2),
      UCD_DOUBLE("optim.g.eps", g_optim.eps),
      UCD_DOUBLE("optim.d.lr", d_optim.lr),
      UCD_DOUBLE("optim.d.beta1", d_optim.beta1),
      UCD_DOUBLE("optim.d.beta2", d_optim.beta2),
      UCD_DOUBLE("optim.d.eps", d_optim.eps),
      UCD_SIZE("model.latent_dim", model.latent_dim),
      UCD_SIZE("model.embedding_dim", model.embedding_dim),
      UCD_SIZE("model.hidden", model.hidden),
      UCD_SIZE("model.hidden_layers", model.hidden_layers),
      UCD_SIZE("model.feature_dim", model.feature_dim),
      UCD_SIZE("probe.every", probe.every),
      UCD_SIZE("probe.samples", probe.samples),
      Field{"probe.ks", [](TrainConfig& c, const std::string& v) { c.probe.ks = to_list(v); },
            [](const TrainConfig& c) { return fmt_list(c.probe.ks); }},
      UCD_SIZE("metrics.every", metrics.every),
      UCD_SIZE("metrics.samples", metrics.samples),
      UCD_SIZE("metrics.pr_samples", metrics.pr_samples),
      UCD_SIZE("metrics.pr_k", metrics.pr_k),
      UCD_DOUBLE("metrics.coverage_radius_sigmas", metrics.coverage_radius_sigmas),
      Field{"data.kind", [](TrainConfig& c, const std::string& v) { c.data.kind = parse_dataset_kind(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.data.kind)); }},
      UCD_SIZE("data.classes", data.n_classes),
      UCD_DOUBLE("data.radius", data.radius),
      UCD_DOUBLE("data.spacing", data.spacing),
      UCD_DOUBLE("data.sigma", data.sigma),
      UCD_SIZE("data.dim", data.sample_dim),
      Field{"data.path", [](TrainConfig& c, const std::string& v) { c.data.path = v; },
            [](const TrainConfig& c) { return c.data.path.string(); }},
      UCD_DOUBLE("augment.jitter", augment.jitter_std),
      UCD_DOUBLE("augment.rotation", augment.rotation_max),
      UCD_DOUBLE("augment.scale_lo", augment.scale_lo),
      UCD_DOUBLE("augment.scale_hi", augment.scale_hi),
      UCD_SIZE("log.every", log_every),
      Field{"log.wall_clock", [](TrainConfig& c, const std::string& v) { c.wall_clock = to_bool(v); },
            [](const TrainConfig& c) { return std::string(c.wall_clock ? "true" : "false"); }},
  };
  return table;
}

#undef UCD_DOUBLE
#undef UCD_SIZE

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

std::vector<ConfigEntry> parse_config_entries(const std::string& text, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!section.empty()) key = section + "." + key;
    out.push_back({std::move(key), std::move(value), where});
  }
  return out;
}

std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_entries(ss.str(), path.string());
}

ConfigEntry parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--set " + text + ": expected KEY=VALUE");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1)), "--set " + text};
}

TrainConfig build_config(const std::vector<ConfigEntry>& entries) {
  Variant variant = Variant::C;
  for (const auto& e : entries) {
    if (e.key == "variant") {
      try {
        variant = parse_variant(e.value);
      } catch (const ConfigError& err) {
        throw ConfigError(e.origin + ": variant: " + err.what());
      }
    }
  }
  TrainConfig cfg = TrainConfig::defaults(variant);
  for (const auto& e : entries) {
    const Field* f = find_field(e.key);
    if (!f) throw ConfigError(e.origin + ": unknown key '" + e.key + "'");
    try {
      f->set(cfg, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(e.origin + ": " + e.key + ": " + err.what());
    } catch (const std::exception& err) {
      throw ConfigError(e.origin + ": " + e.key + ": " + err.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

std::string resolved_config_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace ucd
