#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "ucd/adam.hpp"
#include "ucd/checkpoint.hpp"
#include "ucd/config.hpp"
#include "ucd/data.hpp"
#include "ucd/dino.hpp"
#include "ucd/nets.hpp"
#include "ucd/probe.hpp"

namespace ucd {

struct StepLosses {
  double g_loss = 0.0;
  double d_loss = 0.0;
  double class_loss = 0.0;
  double dino_loss = 0.0;
};

// Real batch plus the latent codes for the fakes; fakes reuse the real labels.
struct StepBatch {
  LabeledBatch real;
  Tensor z;
};

// Everything a run mutates, in one place.
struct TrainState {
  GeneratorNet generator;
  DiscriminatorNet discriminator;
  Adam g_opt;
  Adam d_opt;
  std::optional<DinoState> dino;
  Rng augment_rng;
  std::size_t step = 0;

  // Builds nets and optimizers from the config using the init stream.
  static TrainState create(const TrainConfig& cfg);
  Checkpoint checkpoint() const;
};

// Called between the G phase and the D phase (tests use it to inspect the
// frozen net).
using PhaseObserver = std::function<void(const TrainState&)>;

// One G step (D frozen) followed by one D step (G frozen) on the detached
// fakes produced before the G update.
StepLosses train_step_config_a(TrainState& st, const StepBatch& batch, const TrainConfig& cfg,
                               const PhaseObserver& after_g = {});
StepLosses train_step_config_b(TrainState& st, const StepBatch& batch, const TrainConfig& cfg,
                               const PhaseObserver& after_g = {});
// Config B step plus lambda2 times the self-distillation term on two augmented
// views of the real batch and of the fakes.
StepLosses train_step_config_c(TrainState& st, const StepBatch& batch, const TrainConfig& cfg,
                               const PhaseObserver& after_g = {});
StepLosses train_step(TrainState& st, const StepBatch& batch, const TrainConfig& cfg,
                      const PhaseObserver& after_g = {});

StepBatch draw_step_batch(const Dataset& data, std::size_t batch, std::size_t latent_dim, Rng& rng);

struct EvalMetrics {
  double frechet_pooled = 0.0;
  std::vector<double> frechet_per_class;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<std::size_t> modes_covered;  // mixtures only
};

// Fréchet distances, k-NN precision/recall and mode coverage of generator
// samples against fresh data samples.
EvalMetrics evaluate_generator(const GeneratorNet& g, const Dataset& data, const MetricSettings& settings, Rng& rng);

struct TrainReport {
  std::size_t steps = 0;
  StepLosses last_losses;
  std::vector<ProbeReport> probes;
  std::optional<EvalMetrics> final_metrics;
  std::filesystem::path log_path;
  std::filesystem::path checkpoint_path;
};

// Runs the full schedule. Writes log.jsonl, final.ckpt and resolved-config.txt
// into outdir. A non-finite loss writes a diagnostic record and throws
// TrainingDiverged.
TrainReport run_training(const TrainConfig& cfg, const std::filesystem::path& outdir);

// Report of a finished run of exactly this config found in outdir (same
// resolved-config.txt, a checkpoint, and a log ending in the final metrics
// record). Probe reports carry only the accuracies.
std::optional<TrainReport> load_finished_run(const TrainConfig& cfg, const std::filesystem::path& outdir);

}  // namespace ucd
