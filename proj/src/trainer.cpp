#include "ucd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "json.hpp"

#include "ucd/errors.hpp"
#include "ucd/losses.hpp"
#include "ucd/metrics.hpp"

namespace ucd {

using Json = nlohmann::ordered_json;

namespace {

CondSpec cond_of(const TrainConfig& cfg) { return {cfg.data.n_classes, cfg.model.embedding_dim}; }

Tensor normal_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = n(rng);
  return Tensor({rows, cols}, std::move(v));
}

void require_head(const TrainState& st, HeadKind kind, const char* who) {
  if (st.discriminator.head_kind() != kind) {
    throw ContractError(std::string(who) + ": discriminator head is " + head_kind_name(st.discriminator.head_kind()));
  }
}

// G phase shared by B and C: returns the pre-update fakes, detached.
Tensor ucd_generator_phase(TrainState& st, const StepBatch& batch, const TrainConfig& cfg, StepLosses& out,
                           const PhaseObserver& after_g) {
  st.discriminator.set_trainable(false);
  st.generator.set_trainable(true);
  const Tensor fake = st.generator.forward(batch.z, batch.real.labels);
  const Tensor g_loss = ucd_g_loss(st.discriminator.logits(fake), batch.real.labels, cfg.gan_loss);
  backward(g_loss);
  st.g_opt.step();
  out.g_loss = g_loss.item();
  if (after_g) after_g(st);
  st.generator.set_trainable(false);
  st.discriminator.set_trainable(true);
  return fake.detach();
}

void finish_d_phase(TrainState& st, const Tensor& d_loss, StepLosses& out) {
  backward(d_loss);
  st.d_opt.step();
  out.d_loss = d_loss.item();
  st.generator.set_trainable(true);
}

}  // namespace

TrainState TrainState::create(const TrainConfig& cfg) {
  cfg.validate();
  Rng init = make_stream(cfg.seed, streams::init);
  const CondSpec cond = cond_of(cfg);
  GeneratorShape gs{cfg.model.latent_dim, cfg.model.hidden, cfg.model.hidden_layers, cfg.data.sample_dim};
  DiscriminatorShape ds{cfg.data.sample_dim, cfg.model.hidden, cfg.model.hidden_layers, cfg.model.feature_dim};
  const HeadKind head = cfg.variant == Variant::A ? HeadKind::conditional_scalar : HeadKind::unconditional_logits;
  TrainState st{GeneratorNet(cond, gs, init), DiscriminatorNet(cond, ds, head, init), {}, {}, std::nullopt,
                make_stream(cfg.seed, streams::augment), 0};
  st.g_opt = Adam(st.generator.parameters(), cfg.g_optim);
  st.d_opt = Adam(st.discriminator.parameters(), cfg.d_optim);
  if (cfg.variant == Variant::C) st.dino = DinoState::initial(cfg.data.n_classes, cfg.dino_temperature, cfg.dino_momentum);
  return st;
}

Checkpoint TrainState::checkpoint() const { return {generator, discriminator, dino}; }

StepLosses train_step_config_a(TrainState& st, const StepBatch& batch, const TrainConfig& cfg,
                               const PhaseObserver& after_g) {
  require_head(st, HeadKind::conditional_scalar, "train_step_config_a");
  StepLosses out;
  const auto& labels = batch.real.labels;

  st.discriminator.set_trainable(false);
  st.generator.set_trainable(true);
  const Tensor fake = st.generator.forward(batch.z, labels);
  const Tensor g_loss = vanilla_g_loss(st.discriminator.conditional(fake, labels), cfg.gan_loss);
  backward(g_loss);
  st.g_opt.step();
  out.g_loss = g_loss.item();
  if (after_g) after_g(st);

  st.generator.set_trainable(false);
  st.discriminator.set_trainable(true);
  const Tensor d_loss = vanilla_d_loss(st.discriminator.conditional(batch.real.x, labels),
                                       st.discriminator.conditional(fake.detach(), labels), cfg.gan_loss);
  finish_d_phase(st, d_loss, out);
  return out;
}

StepLosses train_step_config_b(TrainState& st, const StepBatch& batch, const TrainConfig& cfg,
                               const PhaseObserver& after_g) {
  require_head(st, HeadKind::unconditional_logits, "train_step_config_b");
  if (cfg.weights.lambda2 != 0.0) throw ContractError("train_step_config_b: lambda2 must be 0");
  StepLosses out;
  const Tensor fake = ucd_generator_phase(st, batch, cfg, out, after_g);
  const auto parts = ucd_d_loss_parts(st.discriminator.logits(batch.real.x), st.discriminator.logits(fake),
                                      batch.real.labels, cfg.weights, cfg.gan_loss, cfg.class_loss);
  out.class_loss = parts.classification.item();
  finish_d_phase(st, parts.total, out);
  return out;
}

StepLosses train_step_config_c(TrainState& st, const StepBatch& batch, const TrainConfig& cfg,
                               const PhaseObserver& after_g) {
  require_head(st, HeadKind::unconditional_logits, "train_step_config_c");
  if (!st.dino) throw ContractError("train_step_config_c: missing self-distillation state");
  StepLosses out;
  const Tensor fake = ucd_generator_phase(st, batch, cfg, out, after_g);
  const auto parts = ucd_d_loss_parts(st.discriminator.logits(batch.real.x), st.discriminator.logits(fake),
                                      batch.real.labels, cfg.weights, cfg.gan_loss, cfg.class_loss);
  DinoViews views;
  views.real_teacher_view = augment(batch.real.x, cfg.augment, st.augment_rng);
  views.real_student_view = augment(batch.real.x, cfg.augment, st.augment_rng);
  views.fake_teacher_view = augment(fake, cfg.augment, st.augment_rng);
  views.fake_student_view = augment(fake, cfg.augment, st.augment_rng);
  const Tensor dino = dino_term_for_step(views, st.discriminator, *st.dino);
  const Tensor total = add(parts.total, scale(dino, cfg.weights.lambda2));
  out.class_loss = parts.classification.item();
  out.dino_loss = dino.item();
  finish_d_phase(st, total, out);
  return out;
}

StepLosses train_step(TrainState& st, const StepBatch& batch, const TrainConfig& cfg, const PhaseObserver& after_g) {
  switch (cfg.variant) {
    case Variant::A: return train_step_config_a(st, batch, cfg, after_g);
    case Variant::B: return train_step_config_b(st, batch, cfg, after_g);
    case Variant::C: return train_step_config_c(st, batch, cfg, after_g);
  }
  throw ContractError("train_step: unknown variant");
}

StepBatch draw_step_batch(const Dataset& data, std::size_t batch, std::size_t latent_dim, Rng& rng) {
  LabeledBatch real = data.sample_labeled(batch, rng);
  Tensor z = normal_tensor(batch, latent_dim, rng);
  return {std::move(real), std::move(z)};
}

EvalMetrics evaluate_generator(const GeneratorNet& g, const Dataset& data, const MetricSettings& settings, Rng& rng) {
  const std::size_t n = settings.samples;
  const std::size_t dim = data.dim();
  const std::size_t card = data.n_classes();
  const LabeledBatch real = data.sample_labeled(n, rng);
  std::vector<double> fake(n * dim);
  {
    NoGradGuard no_grad;
    constexpr std::size_t kChunk = 4096;
    for (std::size_t begin = 0; begin < n; begin += kChunk) {
      const std::size_t end = std::min(n, begin + kChunk);
      const std::span<const std::size_t> labels(real.labels.data() + begin, end - begin);
      const Tensor z = normal_tensor(end - begin, g.latent_dim(), rng);
      const Tensor out = g.forward(z, labels);
      std::copy(out.data().begin(), out.data().end(), fake.begin() + static_cast<std::ptrdiff_t>(begin * dim));
    }
  }
  const auto real_rows = real.x.data();
  EvalMetrics m;
  m.frechet_pooled = frechet_distance(GaussianSummary::from_samples(real_rows, dim), GaussianSummary::from_samples(fake, dim));
  std::vector<std::vector<double>> real_by(card), fake_by(card);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = real.labels[i];
    real_by[c].insert(real_by[c].end(), real_rows.begin() + static_cast<std::ptrdiff_t>(i * dim),
                      real_rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    fake_by[c].insert(fake_by[c].end(), fake.begin() + static_cast<std::ptrdiff_t>(i * dim),
                      fake.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  }
  for (std::size_t c = 0; c < card; ++c) {
    if (real_by[c].size() < 2 * dim) {
      m.frechet_per_class.push_back(std::nan(""));
      continue;
    }
    m.frechet_per_class.push_back(frechet_distance(GaussianSummary::from_samples(real_by[c], dim),
                                                   GaussianSummary::from_samples(fake_by[c], dim)));
  }
  const std::size_t pr_n = std::min(settings.pr_samples, n);
  const auto pr = knn_precision_recall(real_rows.first(pr_n * dim), std::span<const double>(fake).first(pr_n * dim), dim,
                                       settings.pr_k);
  m.precision = pr.precision;
  m.recall = pr.recall;
  if (const GaussianMixture* mix = data.mixture()) {
    m.modes_covered = mode_coverage(fake, dim, *mix, settings.coverage_radius_sigmas * mix->max_sigma()).covered;
  }
  return m;
}

namespace {

Json loss_fields(std::size_t step, const StepLosses& l) {
  Json j;
  j["step"] = step;
  j["g_loss"] = l.g_loss;
  j["d_loss"] = l.d_loss;
  j["class_loss"] = l.class_loss;
  j["dino_loss"] = l.dino_loss;
  return j;
}

// Activation buffers of a few hundred KB are allocated and freed every op.
// glibc would hand each one back to the kernel and fault it in again.
void keep_buffers_on_heap() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

bool finite(const StepLosses& l) {
  return std::isfinite(l.g_loss) && std::isfinite(l.d_loss) && std::isfinite(l.class_loss) && std::isfinite(l.dino_loss);
}

}  // namespace

TrainReport run_training(const TrainConfig& cfg, const std::filesystem::path& outdir) {
  cfg.validate();
  keep_buffers_on_heap();
  std::filesystem::create_directories(outdir);
  {
    std::ofstream rc(outdir / "resolved-config.txt", std::ios::trunc);
    if (!rc) throw std::runtime_error("cannot write " + (outdir / "resolved-config.txt").string());
    rc << resolved_config_text(cfg);
  }
  const Dataset data(cfg.data);
  if (data.dim() != cfg.data.sample_dim) throw ConfigError("data.dim does not match the dataset");
  TrainState st = TrainState::create(cfg);
  Rng train_rng = make_stream(cfg.seed, streams::train);
  Rng probe_rng = make_stream(cfg.seed, streams::probe);
  Rng metrics_rng = make_stream(cfg.seed, streams::metrics);
  const LabeledBatch probe_set = cfg.probe.every > 0 ? data.sample_labeled(cfg.probe.samples, probe_rng) : LabeledBatch{};

  TrainReport report;
  report.log_path = outdir / "log.jsonl";
  report.checkpoint_path = outdir / "final.ckpt";
  std::ofstream log(report.log_path, std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + report.log_path.string());

  using Clock = std::chrono::steady_clock;
  auto window_start = Clock::now();
  std::size_t window_steps = 0;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const StepBatch batch = draw_step_batch(data, cfg.batch_size, cfg.model.latent_dim, train_rng);
    const StepLosses losses = train_step(st, batch, cfg);
    st.step = step;
    ++window_steps;
    report.last_losses = losses;

    if (!finite(losses)) {
      Json j = loss_fields(step, losses);
      j["diverged"] = true;
      log << j.dump() << '\n';
      log.flush();
      throw TrainingDiverged("non-finite loss at step " + std::to_string(step) + ": " + j.dump(), step);
    }

    const bool last = step == cfg.steps;
    const bool do_probe = cfg.probe.every > 0 && step % cfg.probe.every == 0;
    const bool do_metrics = cfg.metrics.every > 0 ? (step % cfg.metrics.every == 0 || last) : last;
    const bool do_log = (cfg.log_every > 0 && step % cfg.log_every == 0) || do_probe || do_metrics;
    if (!do_log) continue;

    const double step_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - window_start).count() / static_cast<double>(window_steps);
    Json j = loss_fields(step, losses);
    if (do_probe) {
      ProbeReport pr = probe_discriminator(st.discriminator, probe_set, cfg.probe.ks);
      pr.step = step;
      for (const auto& [k, acc] : pr.top_k_accuracy) j["probe_top" + std::to_string(k)] = acc;
      report.probes.push_back(std::move(pr));
    }
    if (do_metrics) {
      const EvalMetrics m = evaluate_generator(st.generator, data, cfg.metrics, metrics_rng);
      j["frechet_pooled"] = m.frechet_pooled;
      j["frechet_per_class"] = m.frechet_per_class;
      j["precision"] = m.precision;
      j["recall"] = m.recall;
      if (m.modes_covered) j["modes_covered"] = *m.modes_covered;
      if (last) report.final_metrics = m;
    }
    if (cfg.wall_clock) j["iter_ms"] = step_ms;
    log << j.dump() << '\n';
    log.flush();
    window_start = Clock::now();
    window_steps = 0;
  }
  log.flush();
  save_checkpoint(st.checkpoint(), report.checkpoint_path);
  report.steps = cfg.steps;
  return report;
}

std::optional<TrainReport> load_finished_run(const TrainConfig& cfg, const std::filesystem::path& outdir) {
  TrainReport report;
  report.log_path = outdir / "log.jsonl";
  report.checkpoint_path = outdir / "final.ckpt";
  if (!std::filesystem::exists(report.checkpoint_path)) return std::nullopt;
  {
    std::ifstream rc(outdir / "resolved-config.txt");
    const std::string text{std::istreambuf_iterator<char>(rc), {}};
    if (!rc || text != resolved_config_text(cfg)) return std::nullopt;
  }
  std::ifstream log(report.log_path);
  std::string line;
  Json last;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    bool has_probe = false;
    ProbeReport pr;
    pr.step = j.value("step", std::size_t{0});
    pr.n_samples = cfg.probe.samples;
    pr.kind = cfg.variant == Variant::A ? ProbeKind::conditional : ProbeKind::ucd;
    for (std::size_t k : cfg.probe.ks) {
      const std::string key = "probe_top" + std::to_string(k);
      if (j.contains(key)) {
        pr.top_k_accuracy[k] = j[key].get<double>();
        has_probe = true;
      }
    }
    if (has_probe) report.probes.push_back(std::move(pr));
    last = std::move(j);
  }
  if (!last.is_object() || last.value("step", std::size_t{0}) != cfg.steps || !last.contains("frechet_pooled")) {
    return std::nullopt;
  }
  report.steps = cfg.steps;
  report.last_losses = {last["g_loss"].get<double>(), last["d_loss"].get<double>(), last["class_loss"].get<double>(),
                        last["dino_loss"].get<double>()};
  EvalMetrics m;
  m.frechet_pooled = last["frechet_pooled"].get<double>();
  for (const auto& v : last["frechet_per_class"]) m.frechet_per_class.push_back(v.is_number() ? v.get<double>() : std::nan(""));
  m.precision = last["precision"].get<double>();
  m.recall = last["recall"].get<double>();
  if (last.contains("modes_covered")) m.modes_covered = last["modes_covered"].get<std::size_t>();
  report.final_metrics = m;
  return report;
}

}  // namespace ucd
