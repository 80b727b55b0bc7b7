#include "ucd/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "ucd/data.hpp"
#include "ucd/errors.hpp"
#include "ucd/probe.hpp"

namespace ucd {

namespace {

const double kLogitBound = std::log((1.0 - kTabularClamp) / kTabularClamp);

double sigmoid_value(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus_value(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

// Loss restricted to one support point; theta holds that point's logits.
class PointProblem {
 public:
  PointProblem(const TabularGame& game, std::size_t x, const OracleOptions& options)
      : classes_(game.classes), options_(options), q_(classes_), p_(classes_), w_(classes_, 0.0) {
    for (std::size_t c = 0; c < classes_; ++c) {
      q_[c] = game.q_at(x, c);
      p_[c] = game.p_at(x, c);
      if (options.form == TabularLossForm::ucd) w_[c] = 0.5 * options.lambda1 * (q_[c] + p_[c]);
    }
  }

  bool has_mass(std::size_t c) const { return q_[c] + p_[c] > 0.0 || class_weight() > 0.0; }

  double loss(std::span<const double> theta) const {
    double total = 0.0;
    for (std::size_t c = 0; c < classes_; ++c) total += q_[c] * softplus_value(-theta[c]) + p_[c] * softplus_value(theta[c]);
    if (class_weight() == 0.0) return total;
    if (options_.class_loss.variant == ClassLossKind::Variant::cross_entropy) {
      const double lse = log_sum_exp(theta);
      for (std::size_t c = 0; c < classes_; ++c) total += w_[c] * (lse - theta[c]);
    } else {
      for (std::size_t c = 0; c < classes_; ++c) {
        if (w_[c] == 0.0) continue;
        for (std::size_t i = 0; i < classes_; ++i) {
          if (i != c) total += w_[c] * std::max(0.0, options_.class_loss.margin + theta[i] - theta[c]);
        }
      }
    }
    return total;
  }

  // One-sided partial derivatives of the loss along coordinate c.
  std::pair<double, double> derivative(std::span<const double> theta, std::size_t c) const {
    const double adversarial = (q_[c] + p_[c]) * sigmoid_value(theta[c]) - q_[c];
    if (class_weight() == 0.0) return {adversarial, adversarial};
    if (options_.class_loss.variant == ClassLossKind::Variant::cross_entropy) {
      const double lse = log_sum_exp(theta);
      const double d = adversarial + class_weight() * std::exp(theta[c] - lse) - w_[c];
      return {d, d};
    }
    double left = adversarial;
    double right = adversarial;
    const double m = options_.class_loss.margin;
    for (std::size_t label = 0; label < classes_; ++label) {
      if (w_[label] == 0.0) continue;
      if (label != c) {
        const double u = m + theta[c] - theta[label];
        if (u > 0.0) left += w_[label];
        if (u >= 0.0) right += w_[label];
      } else {
        for (std::size_t i = 0; i < classes_; ++i) {
          if (i == c) continue;
          const double u = m + theta[i] - theta[c];
          if (u >= 0.0) left -= w_[c];
          if (u > 0.0) right -= w_[c];
        }
      }
    }
    return {left, right};
  }

  // How far coordinate c is from first-order optimality inside the box.
  double violation(std::span<const double> theta, std::size_t c) const {
    const auto [left, right] = derivative(theta, c);
    const bool at_lower = theta[c] <= -kLogitBound;
    const bool at_upper = theta[c] >= kLogitBound;
    if (right < 0.0 && !at_upper) return -right;
    if (left > 0.0 && !at_lower) return left;
    return 0.0;
  }

  // Exact minimiser of the convex slice through coordinate c.
  void minimize_coordinate(std::vector<double>& theta, std::size_t c) const {
    auto right_at = [&](double t) {
      theta[c] = t;
      return derivative(theta, c).second;
    };
    auto left_at = [&](double t) {
      theta[c] = t;
      return derivative(theta, c).first;
    };
    double lo = -kLogitBound;
    double hi = kLogitBound;
    if (right_at(lo) >= 0.0) {
      theta[c] = lo;
      return;
    }
    if (left_at(hi) <= 0.0) {
      theta[c] = hi;
      return;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (right_at(mid) >= 0.0) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    theta[c] = 0.5 * (lo + hi);
  }

  double class_weight() const {
    double w = 0.0;
    for (double v : w_) w += v;
    return w;
  }

 private:
  static double log_sum_exp(std::span<const double> theta) {
    const double peak = *std::max_element(theta.begin(), theta.end());
    double total = 0.0;
    for (double t : theta) total += std::exp(t - peak);
    return peak + std::log(total);
  }

  std::size_t classes_;
  const OracleOptions& options_;
  std::vector<double> q_;
  std::vector<double> p_;
  std::vector<double> w_;
};

}  // namespace

void TabularGame::validate() const {
  const auto where = [&] { return name.empty() ? std::string("game") : "game '" + name + "'"; };
  if (classes == 0 || n_points == 0) throw ValidationError(where() + ": empty support or no classes");
  if (q.size() != n_points * classes || p_g.size() != n_points * classes || label_of.size() != n_points) {
    throw ValidationError(where() + ": matrix sizes do not match " + std::to_string(n_points) + " x " +
                          std::to_string(classes));
  }
  for (std::size_t x = 0; x < n_points; ++x) {
    if (label_of[x] >= classes) {
      throw ValidationError(where() + ": point " + std::to_string(x) + " has label " + std::to_string(label_of[x]) +
                            " outside " + std::to_string(classes) + " classes");
    }
    for (std::size_t c = 0; c < classes; ++c) {
      const double qv = q_at(x, c);
      const double pv = p_at(x, c);
      if (!(qv >= 0.0) || !(pv >= 0.0) || !std::isfinite(qv) || !std::isfinite(pv)) {
        throw ValidationError(where() + ": negative or non-finite density at point " + std::to_string(x));
      }
      if (c != label_of[x] && qv != 0.0) {
        throw ValidationError(where() + ": disjointness violated, q(x=" + std::to_string(x) + " | c=" +
                              std::to_string(c) + ") > 0 but the point is labelled " + std::to_string(label_of[x]));
      }
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    double sq = 0.0;
    double sp = 0.0;
    for (std::size_t x = 0; x < n_points; ++x) {
      sq += q_at(x, c);
      sp += p_at(x, c);
    }
    if (std::abs(sq - 1.0) > 1e-9) throw ValidationError(where() + ": column " + std::to_string(c) + " of q sums to " + std::to_string(sq));
    if (std::abs(sp - 1.0) > 1e-9) throw ValidationError(where() + ": column " + std::to_string(c) + " of p_g sums to " + std::to_string(sp));
  }
}

bool TabularGame::generator_respects_labels() const {
  for (std::size_t x = 0; x < n_points; ++x) {
    for (std::size_t c = 0; c < classes; ++c) {
      if (c != label_of[x] && p_at(x, c) > 0.0) return false;
    }
  }
  return true;
}

double TabularD::off_label_mass(std::size_t x, std::size_t label) const {
  if (logits.empty()) throw ContractError("off_label_mass: no logits recorded");
  const double* row = logits.data() + x * classes;
  const double peak = *std::max_element(row, row + classes);
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - peak);
  return 1.0 - std::exp(row[label] - peak) / total;
}

TabularD closed_form_dstar(const TabularGame& game) {
  game.validate();
  TabularD d{game.n_points, game.classes, std::vector<double>(game.n_points * game.classes, 0.0), {}, 0.0, 0};
  for (std::size_t x = 0; x < game.n_points; ++x) {
    for (std::size_t c = 0; c < game.classes; ++c) {
      const double qv = game.q_at(x, c);
      const double denom = qv + game.p_at(x, c);
      d.values[x * game.classes + c] = denom > 0.0 ? qv / denom : 0.0;
    }
  }
  return d;
}

double population_loss(const TabularGame& game, std::span<const double> logits, const OracleOptions& options) {
  if (logits.size() != game.n_points * game.classes) throw DimensionError("population_loss: logit table size mismatch");
  double total = 0.0;
  for (std::size_t x = 0; x < game.n_points; ++x) {
    total += PointProblem(game, x, options).loss(logits.subspan(x * game.classes, game.classes));
  }
  return total;
}

TabularD optimize_tabular_d(const TabularGame& game, const OracleOptions& options) {
  game.validate();
  options.class_loss.validate();
  if (options.lambda1 < 0.0) throw ContractError("optimize_tabular_d: lambda1 must be non-negative");
  const std::size_t n_cls = game.classes;
  TabularD d{game.n_points, n_cls, std::vector<double>(game.n_points * n_cls), std::vector<double>(game.n_points * n_cls),
             0.0, 0};
  double norm2 = 0.0;
  for (std::size_t x = 0; x < game.n_points; ++x) {
    const PointProblem problem(game, x, options);
    std::vector<double> theta(n_cls, 0.0);
    for (std::size_t c = 0; c < n_cls; ++c) {
      if (!problem.has_mass(c)) theta[c] = -kLogitBound;
    }
    double point_norm2 = 0.0;
    std::size_t sweeps = 0;
    while (true) {
      point_norm2 = 0.0;
      for (std::size_t c = 0; c < n_cls; ++c) {
        const double v = problem.violation(theta, c);
        point_norm2 += v * v;
      }
      if (std::sqrt(point_norm2) < options.tolerance) break;
      if (sweeps == options.max_iterations) {
        throw ConvergenceError("optimize_tabular_d: no convergence at point " + std::to_string(x) + " of " +
                                   (game.name.empty() ? std::string("game") : game.name) + ", gradient norm " +
                                   std::to_string(std::sqrt(point_norm2)),
                               std::sqrt(point_norm2));
      }
      for (std::size_t c = 0; c < n_cls; ++c) problem.minimize_coordinate(theta, c);
      ++sweeps;
    }
    norm2 += point_norm2;
    d.iterations = std::max(d.iterations, sweeps);
    for (std::size_t c = 0; c < n_cls; ++c) {
      d.logits[x * n_cls + c] = theta[c];
      d.values[x * n_cls + c] = sigmoid_value(theta[c]);
    }
  }
  d.grad_norm = std::sqrt(norm2);
  return d;
}

bool Theorem1Report::passed() const {
  for (const auto& r : rows) {
    if (!r.passed) return false;
  }
  for (const auto& c : classifier) {
    if (c.asserted && !c.passed) return false;
  }
  for (const auto& [game, spread] : lambda_spread) {
    if (spread >= tolerance) return false;
  }
  return true;
}

Theorem1Report verify_theorem1(std::span<const TabularGame> games, std::span<const double> lambdas, double tolerance) {
  if (lambdas.empty()) throw ContractError("verify_theorem1: empty lambda grid");
  Theorem1Report report;
  report.tolerance = tolerance;
  for (const auto& game : games) {
    const TabularD exact = closed_form_dstar(game);
    OracleOptions vanilla_opts;
    vanilla_opts.form = TabularLossForm::vanilla;
    const TabularD vanilla = optimize_tabular_d(game, vanilla_opts);
    double vanilla_dev = 0.0;
    for (std::size_t i = 0; i < exact.values.size(); ++i) {
      vanilla_dev = std::max(vanilla_dev, std::abs(vanilla.values[i] - exact.values[i]));
    }
    std::vector<double> low(game.n_points, 2.0);
    std::vector<double> high(game.n_points, -1.0);
    for (double lambda : lambdas) {
      OracleOptions opts;
      opts.form = TabularLossForm::ucd;
      opts.lambda1 = lambda;
      const TabularD optimized = optimize_tabular_d(game, opts);
      Theorem1Row row;
      row.game = game.name;
      row.lambda1 = lambda;
      row.vanilla_max_deviation = vanilla_dev;
      row.grad_norm = optimized.grad_norm;
      row.iterations = optimized.iterations;
      for (std::size_t x = 0; x < game.n_points; ++x) {
        const std::size_t label = game.label_of[x];
        const double got = optimized.at(x, label);
        const double want = exact.at(x, label);
        const double dev = std::abs(got - want);
        row.max_deviation = std::max(row.max_deviation, dev);
        row.max_off_label_mass = std::max(row.max_off_label_mass, optimized.off_label_mass(x, label));
        if (dev >= tolerance) row.offending.push_back({x, label, got, want});
        low[x] = std::min(low[x], got);
        high[x] = std::max(high[x], got);
      }
      row.passed = row.offending.empty() && vanilla_dev < kVanillaTolerance;
      report.rows.push_back(std::move(row));
    }
    double spread = 0.0;
    for (std::size_t x = 0; x < game.n_points; ++x) spread = std::max(spread, high[x] - low[x]);
    report.lambda_spread.emplace_back(game.name, spread);

    ClassifierRow cls;
    cls.game = game.name;
    cls.accuracy = classifier_property_check(game);
    cls.asserted = true;
    for (std::size_t x = 0; x < game.n_points; ++x) {
      if (game.q_at(x, game.label_of[x]) <= 0.0) cls.asserted = false;
    }
    cls.passed = !cls.asserted || cls.accuracy == 1.0;
    report.classifier.push_back(cls);
  }
  return report;
}

double classifier_property_check(const TabularGame& game) {
  const TabularD exact = closed_form_dstar(game);
  std::size_t correct = 0;
  for (std::size_t x = 0; x < game.n_points; ++x) {
    const auto order = tie_break(std::span<const double>(exact.values).subspan(x * game.classes, game.classes));
    if (order.front() == game.label_of[x]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(game.n_points);
}

std::vector<double> default_lambda_grid() { return {0.005, 0.01, 0.02, 0.05}; }

namespace {

// Random distribution over `points`, with entries dropped to zero with
// probability `zero_prob` (at least one entry always stays positive).
void fill_column(TabularGame& g, std::vector<double>& matrix, std::size_t c, const std::vector<std::size_t>& points,
                 double lo, double zero_prob, Rng& rng) {
  std::uniform_real_distribution<double> value(lo, 1.0);
  std::bernoulli_distribution drop(zero_prob);
  std::vector<double> w(points.size());
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    w[i] = (i > 0 && drop(rng)) ? 0.0 : value(rng);
    total += w[i];
  }
  for (std::size_t i = 0; i < points.size(); ++i) matrix[points[i] * g.classes + c] = w[i] / total;
}

TabularGame random_game(const std::string& name, Rng& rng, bool equilibrium) {
  std::uniform_int_distribution<std::size_t> class_dist(2, 4);
  TabularGame g;
  g.name = name;
  g.classes = class_dist(rng);
  std::uniform_int_distribution<std::size_t> point_dist(std::max<std::size_t>(g.classes, 2), 10);
  g.n_points = point_dist(rng);
  std::uniform_int_distribution<std::size_t> label_dist(0, g.classes - 1);
  g.label_of.resize(g.n_points);
  for (std::size_t x = 0; x < g.n_points; ++x) g.label_of[x] = x < g.classes ? x : label_dist(rng);
  std::shuffle(g.label_of.begin(), g.label_of.end(), rng);
  g.q.assign(g.n_points * g.classes, 0.0);
  g.p_g.assign(g.n_points * g.classes, 0.0);
  for (std::size_t c = 0; c < g.classes; ++c) {
    std::vector<std::size_t> points;
    for (std::size_t x = 0; x < g.n_points; ++x) {
      if (g.label_of[x] == c) points.push_back(x);
    }
    fill_column(g, g.q, c, points, 0.05, 0.0, rng);
    if (!equilibrium) fill_column(g, g.p_g, c, points, 0.0, 0.25, rng);
  }
  if (equilibrium) g.p_g = g.q;
  g.validate();
  return g;
}

}  // namespace

std::vector<TabularGame> builtin_suite(std::size_t random_games, std::uint64_t seed) {
  std::vector<TabularGame> games;
  // Two points, two classes, generator already matching the data.
  games.push_back(TabularGame{"two_point", 2, 2, {1, 0, 0, 1}, {1, 0, 0, 1}, {0, 1}});
  // Two classes on four points with a generator that misallocates mass.
  games.push_back(TabularGame{"two_class_skewed", 4, 2, {0.75, 0, 0.25, 0, 0, 0.5, 0, 0.5}, {0.25, 0, 0.75, 0, 0, 0.9, 0, 0.1}, {0, 0, 1, 1}});
  // The generator misses point 1 entirely: D* = 1 there.
  games.push_back(TabularGame{"degenerate_missing_point", 3, 2, {0.5, 0, 0.5, 0, 0, 1}, {1, 0, 0, 0, 0, 1}, {0, 0, 1}});
  Rng rng = make_stream(seed, 0);
  for (std::size_t i = 0; i < 5; ++i) games.push_back(random_game("equilibrium_" + std::to_string(i), rng, true));
  for (std::size_t i = 0; i < random_games; ++i) games.push_back(random_game("random_" + std::to_string(i), rng, false));
  for (const auto& g : games) g.validate();
  return games;
}

TabularGame load_game_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("game: cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  if (lines.empty()) throw ValidationError(path.string() + ": empty game file");
  TabularGame g;
  g.name = path.stem().string();
  {
    std::istringstream header(lines[0]);
    if (!(header >> g.n_points >> g.classes) || g.n_points == 0 || g.classes == 0) {
      throw ValidationError(path.string() + ": header must be 'N card'");
    }
  }
  if (lines.size() != g.n_points + 1) {
    throw ValidationError(path.string() + ": expected " + std::to_string(g.n_points) + " rows, got " +
                          std::to_string(lines.size() - 1));
  }
  g.q.resize(g.n_points * g.classes);
  g.p_g.resize(g.n_points * g.classes);
  g.label_of.resize(g.n_points);
  for (std::size_t x = 0; x < g.n_points; ++x) {
    std::istringstream row(lines[x + 1]);
    if (!(row >> g.label_of[x])) throw ValidationError(path.string() + ": row " + std::to_string(x + 1) + ": bad label");
    for (std::size_t c = 0; c < g.classes; ++c) {
      if (!(row >> g.q[x * g.classes + c])) throw ValidationError(path.string() + ": row " + std::to_string(x + 1) + ": bad q value");
    }
    for (std::size_t c = 0; c < g.classes; ++c) {
      if (!(row >> g.p_g[x * g.classes + c])) throw ValidationError(path.string() + ": row " + std::to_string(x + 1) + ": bad p value");
    }
    std::string extra;
    if (row >> extra) throw ValidationError(path.string() + ": row " + std::to_string(x + 1) + ": trailing data");
  }
  g.validate();
  return g;
}

void save_game_file(const std::filesystem::path& path, const TabularGame& game) {
  game.validate();
  std::ofstream out(path);
  if (!out) throw ValidationError("game: cannot write " + path.string());
  out << std::setprecision(17);
  out << game.n_points << ' ' << game.classes << '\n';
  for (std::size_t x = 0; x < game.n_points; ++x) {
    out << game.label_of[x];
    for (std::size_t c = 0; c < game.classes; ++c) out << ' ' << game.q_at(x, c);
    for (std::size_t c = 0; c < game.classes; ++c) out << ' ' << game.p_at(x, c);
    out << '\n';
  }
}

}  // namespace ucd
