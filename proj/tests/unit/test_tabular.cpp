#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ucd/errors.hpp"
#include "ucd/tabular.hpp"

using namespace ucd;

namespace {

TabularGame equal_game() { return TabularGame{"equal", 2, 2, {1, 0, 0, 1}, {1, 0, 0, 1}, {0, 1}}; }

// Point 2 has label 1 but lies outside q's support; the generator still puts
// mass there.
TabularGame off_support_game() {
  return TabularGame{"off_support", 3, 2, {1, 0, 0, 1, 0, 0}, {1, 0, 0, 0.5, 0, 0.5}, {0, 1, 1}};
}

// Brute-force reference: argmax with ties to the lowest index over the raw
// q / (q + p) table.
double enumerate_accuracy(const TabularGame& g) {
  std::size_t correct = 0;
  for (std::size_t x = 0; x < g.n_points; ++x) {
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t c = 0; c < g.classes; ++c) {
      const double q = g.q[x * g.classes + c];
      const double p = g.p_g[x * g.classes + c];
      const double v = q + p > 0 ? q / (q + p) : 0.0;
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    if (best == g.label_of[x]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(g.n_points);
}

}  // namespace

TEST_CASE("closed-form optimum examples") {
  const TabularD eq = closed_form_dstar(equal_game());
  CHECK(eq.at(0, 0) == 0.5);
  CHECK(eq.at(1, 1) == 0.5);
  CHECK(eq.at(0, 1) == 0.0);  // 0/0 convention

  const TabularGame skew{"skew", 2, 1, {0.75, 0.25}, {0.25, 0.75}, {0, 0}};
  CHECK(closed_form_dstar(skew).at(0, 0) == 0.75);

  // Unrelated condition with generator mass: D* = 0.
  const TabularD off = closed_form_dstar(off_support_game());
  CHECK(off.at(2, 1) == 0.0);
  CHECK(off.at(0, 1) == 0.0);
}

TEST_CASE("validation enforces disjointness and column sums") {
  TabularGame g = equal_game();
  g.q = {0.5, 0.5, 0.5, 0.5};
  g.p_g = g.q;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  TabularGame h = equal_game();
  h.p_g = {0.5, 0, 0, 1};
  CHECK_THROWS_AS(h.validate(), ValidationError);
  TabularGame l = equal_game();
  l.label_of = {0, 2};
  CHECK_THROWS_AS(l.validate(), ValidationError);
  CHECK_THROWS_AS(closed_form_dstar(g), ValidationError);
}

TEST_CASE("vanilla form matches the closed form on 50 random games") {
  const auto games = builtin_suite(50, 77);
  OracleOptions opt;
  opt.form = TabularLossForm::vanilla;
  std::size_t random_seen = 0;
  for (const auto& g : games) {
    if (g.name.rfind("random_", 0) == 0) ++random_seen;
    const TabularD exact = closed_form_dstar(g);
    const TabularD got = optimize_tabular_d(g, opt);
    CHECK(got.grad_norm < opt.tolerance);
    for (std::size_t i = 0; i < exact.values.size(); ++i) {
      const double want = std::clamp(exact.values[i], kTabularClamp, 1.0 - kTabularClamp);
      CHECK(std::abs(got.values[i] - want) < 1e-4);
    }
  }
  CHECK(random_seen == 50);
}

TEST_CASE("ucd form with cross entropy at lambda 0.02") {
  OracleOptions opt;
  opt.lambda1 = 0.02;
  for (const auto& g : builtin_suite(20, 5)) {
    const TabularD exact = closed_form_dstar(g);
    const TabularD got = optimize_tabular_d(g, opt);
    for (std::size_t x = 0; x < g.n_points; ++x) {
      const std::size_t c = g.label_of[x];
      CHECK(std::abs(got.at(x, c) - std::clamp(exact.at(x, c), kTabularClamp, 1 - kTabularClamp)) < 1e-3);
      CHECK(got.off_label_mass(x, c) < 1e-3);
    }
  }
}

TEST_CASE("generator missing a point drives the optimum to the clamp") {
  const TabularGame g{"missing", 3, 2, {0.5, 0, 0.5, 0, 0, 1}, {1, 0, 0, 0, 0, 1}, {0, 0, 1}};
  const TabularD d = optimize_tabular_d(g, OracleOptions{});
  CHECK(d.at(1, 0) == doctest::Approx(1.0 - kTabularClamp).epsilon(1e-12));
}

TEST_CASE("oracle optimum on the two-point game across the lambda grid") {
  const std::vector<TabularGame> games{equal_game()};
  const auto grid = default_lambda_grid();
  CHECK(grid == std::vector<double>{0.005, 0.01, 0.02, 0.05});
  const Theorem1Report rep = verify_theorem1(games, grid);
  CHECK(rep.passed());
  CHECK(rep.rows.size() == grid.size());
  for (const auto& row : rep.rows) {
    CHECK(row.passed);
    CHECK(row.max_deviation < 1e-3);
  }
  OracleOptions opt;
  for (double lambda : grid) {
    opt.lambda1 = lambda;
    const TabularD d = optimize_tabular_d(equal_game(), opt);
    CHECK(std::abs(d.at(0, 0) - 0.5) < 1e-3);
    CHECK(std::abs(d.at(1, 1) - 0.5) < 1e-3);
  }
}

TEST_CASE("oracle optimum on random games, lambda spread and hinge loss") {
  const auto games = builtin_suite(20, 9);
  const Theorem1Report rep = verify_theorem1(games, default_lambda_grid());
  CHECK(rep.passed());
  for (const auto& [name, spread] : rep.lambda_spread) CHECK(spread < 1e-3);
  OracleOptions hinge;
  hinge.class_loss = ClassLossKind{ClassLossKind::Variant::multiclass_hinge, 1.0};
  for (const auto& g : games) {
    const TabularD exact = closed_form_dstar(g);
    const TabularD d = optimize_tabular_d(g, hinge);
    for (std::size_t x = 0; x < g.n_points; ++x) {
      const std::size_t c = g.label_of[x];
      CHECK(std::abs(d.at(x, c) - std::clamp(exact.at(x, c), kTabularClamp, 1 - kTabularClamp)) < 1e-3);
    }
  }
}

TEST_CASE("classifier property") {
  CHECK(classifier_property_check(equal_game()) == 1.0);
  const TabularGame bad = off_support_game();
  const double acc = classifier_property_check(bad);
  CHECK(acc == enumerate_accuracy(bad));
  CHECK(acc < 1.0);
  CHECK(std::abs(acc - 2.0 / 3.0) < 1e-15);
  const TabularGame single{"single", 3, 1, {0.2, 0.3, 0.5}, {0.6, 0.1, 0.3}, {0, 0, 0}};
  CHECK(classifier_property_check(single) == 1.0);
  for (const auto& g : builtin_suite(10, 3)) CHECK(classifier_property_check(g) == enumerate_accuracy(g));
}

TEST_CASE("budget exhaustion raises ConvergenceError") {
  OracleOptions opt;
  opt.max_iterations = 1;
  opt.tolerance = 1e-300;
  CHECK_THROWS_AS(optimize_tabular_d(builtin_suite(0, 1)[1], opt), ConvergenceError);
}

TEST_CASE("game files round trip") {
  const auto path = std::filesystem::temp_directory_path() / "ucd_tabular_game.txt";
  for (const auto& g : builtin_suite(3, 4)) {
    save_game_file(path, g);
    const TabularGame back = load_game_file(path);
    CHECK(back.q == g.q);
    CHECK(back.p_g == g.p_g);
    CHECK(back.label_of == g.label_of);
  }
}
