#pragma once

// Finite-support GAN games where the optimal discriminator can be written
// down exactly. Used to check the unconditional-discriminator objective
// against the classical q / (q + p_g) optimum.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ucd/losses.hpp"

namespace ucd {

// q and p_g are N x card matrices, entry (x, c) = density of point x under
// condition c. Every column is a distribution. q never places mass on a point
// under a condition other than that point's label.
struct TabularGame {
  std::string name;
  std::size_t n_points = 0;
  std::size_t classes = 0;
  std::vector<double> q;
  std::vector<double> p_g;
  std::vector<std::size_t> label_of;

  double q_at(std::size_t x, std::size_t c) const { return q[x * classes + c]; }
  double p_at(std::size_t x, std::size_t c) const { return p_g[x * classes + c]; }

  // Throws ValidationError naming the broken invariant.
  void validate() const;
  // True when p_g also keeps every point's mass on that point's label.
  bool generator_respects_labels() const;
};

struct TabularD {
  std::size_t n_points = 0;
  std::size_t classes = 0;
  std::vector<double> values;  // d(x)_c in [0, 1]
  std::vector<double> logits;  // raw parameters (optimizer output only)
  double grad_norm = 0.0;
  std::size_t iterations = 0;

  double at(std::size_t x, std::size_t c) const { return values[x * classes + c]; }
  // Softmax mass of d(x) on classes other than label.
  double off_label_mass(std::size_t x, std::size_t label) const;
};

inline constexpr double kTabularClamp = 1e-9;

// q / (q + p_g) per cell; 0/0 cells are 0.
TabularD closed_form_dstar(const TabularGame& game);

enum class TabularLossForm {
  vanilla,  // conditional D, one independent logit per (x, c)
  ucd,      // unconditional logits with the classification term
};

struct OracleOptions {
  TabularLossForm form = TabularLossForm::ucd;
  double lambda1 = 0.02;
  ClassLossKind class_loss{};
  double tolerance = 1e-8;
  std::size_t max_iterations = 100000;
};

// Minimises the population discriminator loss over per-(x, c) logits clamped
// to [logit(1e-9), logit(1 - 1e-9)]. The loss separates over support points;
// each point is solved by cyclic coordinate descent with an exact line search
// until the projected gradient norm drops below tolerance. Throws
// ConvergenceError when the budget runs out.
TabularD optimize_tabular_d(const TabularGame& game, const OracleOptions& options);

// Population loss for a given logit table (for finite-difference checks of
// the optimizer's derivative).
double population_loss(const TabularGame& game, std::span<const double> logits, const OracleOptions& options);

struct OffendingCell {
  std::size_t point = 0;
  std::size_t cls = 0;
  double optimized = 0.0;
  double closed_form = 0.0;
};

struct Theorem1Row {
  std::string game;
  double lambda1 = 0.0;
  double max_deviation = 0.0;       // over (x, label(x)) cells
  double vanilla_max_deviation = 0.0;  // vanilla-form optimum vs closed form, all cells
  double max_off_label_mass = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  bool passed = false;
  std::vector<OffendingCell> offending;
};

struct ClassifierRow {
  std::string game;
  double accuracy = 0.0;
  bool asserted = false;  // true when every point lies in q's support
  bool passed = false;
};

struct Theorem1Report {
  std::vector<Theorem1Row> rows;
  std::vector<ClassifierRow> classifier;
  // Largest spread of a selected optimum across the lambda grid, per game.
  std::vector<std::pair<std::string, double>> lambda_spread;
  double tolerance = 1e-3;

  bool passed() const;
};

inline constexpr double kOracleTolerance = 1e-3;
inline constexpr double kVanillaTolerance = 1e-4;

Theorem1Report verify_theorem1(std::span<const TabularGame> games, std::span<const double> lambdas,
                               double tolerance = kOracleTolerance);

// Fraction of support points whose argmax_c D*(x, c) equals the label.
double classifier_property_check(const TabularGame& game);

// Lambda grid of the classification-weight ablation.
std::vector<double> default_lambda_grid();

// Two-point game, equilibrium games, a degenerate game and `random_games`
// random games with 2-10 points and 2-4 classes.
std::vector<TabularGame> builtin_suite(std::size_t random_games = 50, std::uint64_t seed = 2024);

// Text format: "N card" header, then N lines "label q_1..q_card p_1..p_card".
TabularGame load_game_file(const std::filesystem::path& path);
void save_game_file(const std::filesystem::path& path, const TabularGame& game);

}  // namespace ucd
