#pragma once

#include <iosfwd>
#include <optional>

#include "fira/linalg.hpp"
#include "fira/optimizers.hpp"
#include "fira/projector.hpp"

namespace fira {

// Plain-text optimizer checkpoint.
//
//   fira-checkpoint 1
//   step_count <int>
//   prev_residual_norm <real|unset>
//   scaling <none|matrix|column>
//   smoothing <none|limiter|clip>
//   matrix m_first <rows> <cols>
//   <rows lines of cols space-separated reals>
//   matrix v_second <rows> <cols>
//   ...
//   projector <none|present>
//   [weight_shape <m> <n>
//    switch_period <T>
//    last_refresh_step <step>
//    matrix basis <rows> <cols>
//    ...]
//
// Reals are printed with 17 significant digits so a write/read cycle is
// exact.
struct Checkpoint {
  FiraState state;
  std::optional<GradProjector> projector;

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
// Throws ParameterError on malformed input.
Checkpoint read_checkpoint(std::istream& in);

void write_matrix(std::ostream& out, const char* name, const Matrix& m);
Matrix read_matrix(std::istream& in, const char* name);

}  // namespace fira
