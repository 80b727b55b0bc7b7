#include <cmath>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "ucd/dino.hpp"
#include "ucd/errors.hpp"

using namespace ucd;
using ucd::testing::random_tensor;

namespace {

void check_distribution_rows(const Tensor& p) {
  for (std::size_t r = 0; r < p.dim(0); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < p.dim(1); ++c) {
      CHECK(p.at(r, c) >= 0.0);
      total += p.at(r, c);
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

}  // namespace

TEST_CASE("teacher on centered logits is uniform") {
  for (double tau : {1e-3, 0.1, 5.0}) {
    DinoState st = DinoState::initial(3, tau, 0.9);
    st.center = {0.4, -1.0, 2.5};
    const Tensor t = run_teacher(Tensor({2, 3}, {0.4, -1.0, 2.5, 0.4, -1.0, 2.5}), st);
    for (double v : t.data()) CHECK(std::abs(v - 1.0 / 3.0) < 1e-15);
  }
}

TEST_CASE("center EMA arithmetic") {
  DinoState st = DinoState::initial(2, 0.1, 0.9);
  (void)run_teacher(Tensor({1, 2}, {0.0, 0.0}), st);
  CHECK(std::abs(st.center[0] - 0.05) < 1e-15);
  CHECK(std::abs(st.center[1] - 0.05) < 1e-15);
}

TEST_CASE("small temperature sharpens to one-hot") {
  DinoState st = DinoState::initial(4, 1e-3, 0.9);
  const Tensor t = run_teacher(Tensor({1, 4}, {0.3, 0.1, 0.25, -0.5}), st);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(t[i] - (i == 0 ? 1.0 : 0.0)) < 1e-6);
}

TEST_CASE("invalid temperature or shape") {
  CHECK_THROWS_AS(DinoState::initial(2, 0.0, 0.9), ContractError);
  DinoState st = DinoState::initial(2);
  st.temperature = -1.0;
  CHECK_THROWS_AS(run_teacher(Tensor({1, 2}, {0.0, 0.0}), st), ContractError);
  DinoState ok = DinoState::initial(2);
  CHECK_THROWS_AS(run_teacher(Tensor({1, 3}, {0.0, 0.0, 0.0}), ok), DimensionError);
  CHECK_THROWS_AS(dino_loss(Tensor({1, 2}, {0.5, 0.5}), Tensor({1, 3}, {0.2, 0.3, 0.5})), ContractError);
}

TEST_CASE("student is a plain softmax") {
  const Tensor s = run_student(Tensor({1, 2}, {0.0, 0.0}));
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);
}

TEST_CASE("dino_loss values") {
  const Tensor u = Tensor::full({3, 4}, 0.25);
  CHECK(std::abs(dino_loss(u, u).item() - std::log(4.0)) < 1e-10);
  for (double delta : {1e-2, 1e-4, 1e-6}) {
    const Tensor teacher({1, 2}, {1.0, 0.0});
    const Tensor student({1, 2}, {1.0 - delta, delta});
    const double got = dino_loss(teacher, student).item();
    CHECK(std::abs(got - delta) < delta * delta + 1e-11);
  }
}

TEST_CASE("teacher and student outputs are distributions; loss is non-negative") {
  std::mt19937_64 r(1);
  DinoState st = DinoState::initial(5, 0.1, 0.9);
  for (int i = 0; i < 20; ++i) {
    const Tensor t = run_teacher(random_tensor({4, 5}, r, -20, 20, false), st);
    const Tensor s = run_student(random_tensor({4, 5}, r, -20, 20, false));
    check_distribution_rows(t);
    check_distribution_rows(s);
    CHECK(dino_loss(t, s).item() >= 0.0);
  }
}

TEST_CASE("center follows the closed-form EMA") {
  std::mt19937_64 r(2);
  const double m = 0.83;
  DinoState st = DinoState::initial(3, 0.2, m);
  st.center = {0.1, 0.2, -0.3};
  const std::vector<double> c0 = st.center;
  std::vector<std::vector<double>> batch_means;
  const std::size_t n = 25;
  for (std::size_t k = 0; k < n; ++k) {
    const Tensor logits = random_tensor({6, 3}, r, -2, 2, false);
    const Tensor t = run_teacher(logits, st);
    std::vector<double> b(3, 0.0);
    for (std::size_t row = 0; row < 6; ++row) {
      for (std::size_t c = 0; c < 3; ++c) b[c] += t.at(row, c) / 6.0;
    }
    batch_means.push_back(b);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    double closed = std::pow(m, static_cast<double>(n)) * c0[c];
    for (std::size_t k = 0; k < n; ++k) {
      closed += (1 - m) * std::pow(m, static_cast<double>(n - 1 - k)) * batch_means[k][c];
    }
    CHECK(std::abs(st.center[c] - closed) < 1e-12);
  }
}

TEST_CASE("no gradient flows through the teacher") {
  Rng rng(3);
  DiscriminatorNet d({3, 2}, DiscriminatorShape{2, 8, 2, 4}, HeadKind::unconditional_logits, rng);
  std::mt19937_64 r(4);
  const Tensor x = random_tensor({5, 2}, r, -1, 1, false);
  DinoState st = DinoState::initial(3);
  // Teacher from the net with grad mode on, student from a constant leaf.
  const Tensor teacher = run_teacher(d.logits(x), st);
  Tensor student_logits = random_tensor({5, 3}, r);
  backward(dino_loss(teacher, run_student(student_logits)));
  CHECK(student_logits.has_grad());
  for (const auto& p : d.parameters()) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) CHECK(g == 0.0);
  }
}

TEST_CASE("dino term on identical views with tau = 1 is the mean entropy") {
  Rng rng(5);
  DiscriminatorNet d({2, 2}, DiscriminatorShape{2, 6, 1, 3}, HeadKind::unconditional_logits, rng);
  std::mt19937_64 r(6);
  const Tensor xr = random_tensor({4, 2}, r, -1, 1, false);
  const Tensor xf = random_tensor({3, 2}, r, -1, 1, false);
  DinoState st = DinoState::initial(2, 1.0, 0.9);
  const double got = dino_term_for_step({xr, xr, xf, xf}, d, st).item();
  const auto mean_entropy = [&](const Tensor& x) {
    const Tensor l = d.logits(x);
    double h = 0.0;
    for (std::size_t i = 0; i < l.dim(0); ++i) {
      const double a = l.at(i, 0), b = l.at(i, 1);
      const double p = 1.0 / (1.0 + std::exp(b - a));
      h -= p * std::log(p + kDinoEpsilon) + (1 - p) * std::log(1 - p + kDinoEpsilon);
    }
    return h / static_cast<double>(l.dim(0));
  };
  // The fake teacher sees a center moved by the real pass, so only the real
  // half matches the entropy; recompute the fake half with that center.
  DinoState after_real = DinoState::initial(2, 1.0, 0.9);
  (void)run_teacher(d.logits(xr), after_real);
  const Tensor ft = run_teacher(d.logits(xf), after_real);
  const double fake_half = dino_loss(ft, run_student(d.logits(xf))).item();
  CHECK(std::abs(got - 0.5 * (mean_entropy(xr) + fake_half)) < 1e-12);
  CHECK(st.center == after_real.center);
}

TEST_CASE("dino term is stateful") {
  Rng rng(7);
  DiscriminatorNet d({3, 2}, DiscriminatorShape{2, 6, 1, 3}, HeadKind::unconditional_logits, rng);
  std::mt19937_64 r(8);
  const Tensor a = random_tensor({4, 2}, r, -1, 1, false);
  const Tensor b = random_tensor({4, 2}, r, -1, 1, false);
  DinoState st = DinoState::initial(3, 0.1, 0.5);
  const double first = dino_term_for_step({a, b, b, a}, d, st).item();
  const double second = dino_term_for_step({a, b, b, a}, d, st).item();
  CHECK(first != second);
}
