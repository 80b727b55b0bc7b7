#pragma once

#include <vector>

#include "ucd/nets.hpp"
#include "ucd/tensor.hpp"

namespace ucd {

// Teacher-side centering and sharpening state for self-distillation.
struct DinoState {
  std::vector<double> center;  // card entries, starts at zero
  double temperature = 0.1;
  double center_momentum = 0.9;

  static DinoState initial(std::size_t cardinality, double temperature = 0.1, double momentum = 0.9);
  void validate() const;
};

inline constexpr double kDinoEpsilon = 1e-12;

// softmax((logits - center) / temperature), detached. Afterwards the center
// moves toward the batch mean of these probabilities:
//   center <- m * center + (1 - m) * mean_rows(teacher)
Tensor run_teacher(const Tensor& logits, DinoState& state);

// Plain softmax of the logits; stays on the tape.
Tensor run_student(const Tensor& logits);

// mean_rows( -sum_i teacher_i * log(student_i + eps) )
Tensor dino_loss(const Tensor& teacher_probs, const Tensor& student_probs);

struct DinoViews {
  Tensor real_teacher_view;
  Tensor real_student_view;
  Tensor fake_teacher_view;
  Tensor fake_student_view;
};

// Teacher on view 1 and student on view 2 for the real batch, then the same
// for the fake batch; returns (real_loss + fake_loss) / 2. The center is
// updated twice, real first.
Tensor dino_term_for_step(const DinoViews& views, const DiscriminatorNet& net, DinoState& state);

}  // namespace ucd
