#include "ucd/dino.hpp"

#include <algorithm>
#include <cmath>

#include "ucd/errors.hpp"

namespace ucd {

DinoState DinoState::initial(std::size_t cardinality, double temperature, double momentum) {
  DinoState s{std::vector<double>(cardinality, 0.0), temperature, momentum};
  s.validate();
  return s;
}

void DinoState::validate() const {
  if (!(temperature > 0.0)) throw ContractError("dino: temperature must be positive");
  if (!(center_momentum >= 0.0 && center_momentum < 1.0)) throw ContractError("dino: center momentum must be in [0, 1)");
  if (center.empty()) throw ContractError("dino: empty center");
  for (double c : center) {
    if (!std::isfinite(c)) throw ContractError("dino: non-finite center");
  }
}

Tensor run_teacher(const Tensor& logits, DinoState& state) {
  state.validate();
  if (logits.rank() != 2 || logits.dim(1) != state.center.size()) {
    throw DimensionError("run_teacher: logits " + shape_str(logits.shape()) + " vs center of " +
                         std::to_string(state.center.size()));
  }
  const std::size_t rows = logits.dim(0);
  const std::size_t card = logits.dim(1);
  const auto in = logits.data();
  std::vector<double> probs(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = probs.data() + r * card;
    for (std::size_t i = 0; i < card; ++i) y[i] = (in[r * card + i] - state.center[i]) / state.temperature;
    const double peak = *std::max_element(y, y + card);
    double total = 0.0;
    for (std::size_t i = 0; i < card; ++i) total += (y[i] = std::exp(y[i] - peak));
    for (std::size_t i = 0; i < card; ++i) y[i] /= total;
  }
  const double m = state.center_momentum;
  for (std::size_t i = 0; i < card; ++i) {
    double batch_center = 0.0;
    for (std::size_t r = 0; r < rows; ++r) batch_center += probs[r * card + i];
    batch_center /= static_cast<double>(rows);
    state.center[i] = state.center[i] * m + batch_center * (1.0 - m);
  }
  return Tensor(logits.shape(), std::move(probs));
}

Tensor run_student(const Tensor& logits) { return softmax(logits); }

Tensor dino_loss(const Tensor& teacher_probs, const Tensor& student_probs) {
  if (teacher_probs.shape() != student_probs.shape() || teacher_probs.rank() != 2) {
    throw ContractError("dino_loss: teacher " + shape_str(teacher_probs.shape()) + " vs student " +
                        shape_str(student_probs.shape()));
  }
  const Tensor cross = sum_last(mul(log(add_scalar(student_probs, kDinoEpsilon)), teacher_probs.detach()));
  return scale(mean(cross), -1.0);
}

Tensor dino_term_for_step(const DinoViews& views, const DiscriminatorNet& net, DinoState& state) {
  Tensor real_teacher;
  {
    NoGradGuard no_grad;
    real_teacher = run_teacher(net.logits(views.real_teacher_view), state);
  }
  const Tensor real_loss = dino_loss(real_teacher, run_student(net.logits(views.real_student_view)));
  Tensor fake_teacher;
  {
    NoGradGuard no_grad;
    fake_teacher = run_teacher(net.logits(views.fake_teacher_view), state);
  }
  const Tensor fake_loss = dino_loss(fake_teacher, run_student(net.logits(views.fake_student_view)));
  return scale(add(real_loss, fake_loss), 0.5);
}

}  // namespace ucd
