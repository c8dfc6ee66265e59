#include "fira/optimizers.hpp"

#include <algorithm>
#include <cmath>

#include "fira/error.hpp"

namespace fira {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) throw ParameterError(std::string(op) + ": shape mismatch");
}

bool transposed(const GradProjector& proj) {
  return proj.orientation() == Orientation::RightProject;
}

// The optimizer works in the m <= n frame: right-projected matrices are
// transposed on the way in and out.
Matrix to_left_frame(const GradProjector& proj, const Matrix& m) {
  return transposed(proj) ? m.transpose() : m;
}

Matrix from_left_frame(const GradProjector& proj, const Matrix& m) {
  return transposed(proj) ? m.transpose() : m;
}

struct LowRankPart {
  GradProjector projector;
  Matrix low_rank;  // R, left frame
  Matrix corrected; // N = psi(R), left frame
  AdamMoments moments;
};

LowRankPart low_rank_adam(const Matrix& w, const Matrix& g,
                          const std::optional<GradProjector>& proj,
                          const AdamMoments& moments, const Hyperparams& hp,
                          std::int64_t step) {
  require_same_shape(w, g, "projected step");
  hp.validate();
  GradProjector next = maybe_refresh(proj, g, step, hp.rank, hp.switch_period);
  Matrix r_left = to_left_frame(next, project(next, g));
  AdamCorrection c = adam_correct(r_left, moments, hp);
  return {std::move(next), std::move(r_left), std::move(c.direction), std::move(c.moments)};
}

}  // namespace

std::string to_string(ScalingMode mode) {
  switch (mode) {
    case ScalingMode::None: return "none";
    case ScalingMode::MatrixLevel: return "matrix";
    case ScalingMode::ColumnLevel: return "column";
  }
  return "?";
}

std::string to_string(SmoothingMode mode) {
  switch (mode) {
    case SmoothingMode::None: return "none";
    case SmoothingMode::NormGrowthLimiter: return "limiter";
    case SmoothingMode::GradientClipping: return "clip";
  }
  return "?";
}

ScalingMode parse_scaling_mode(const std::string& text) {
  if (text == "none") return ScalingMode::None;
  if (text == "matrix") return ScalingMode::MatrixLevel;
  if (text == "column") return ScalingMode::ColumnLevel;
  throw ParameterError("unknown scaling mode '" + text + "' (none|matrix|column)");
}

SmoothingMode parse_smoothing_mode(const std::string& text) {
  if (text == "none") return SmoothingMode::None;
  if (text == "limiter") return SmoothingMode::NormGrowthLimiter;
  if (text == "clip") return SmoothingMode::GradientClipping;
  throw ParameterError("unknown smoothing mode '" + text + "' (none|limiter|clip)");
}

void Hyperparams::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ParameterError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ParameterError("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
  if (!(galore_scale > 0.0)) throw ParameterError("galore_scale must be > 0");
  if (!(limiter_threshold > 1.0)) throw ParameterError("limiter_threshold must be > 1");
  if (!(clip_threshold > 0.0)) throw ParameterError("clip_threshold must be > 0");
  if (rank < 1) throw ParameterError("rank must be >= 1");
  if (switch_period < 1) throw ParameterError("switch_period must be >= 1");
}

AdamMoments AdamMoments::zeros(std::size_t rows, std::size_t cols) {
  return {Matrix(rows, cols), Matrix(rows, cols), 0};
}

Matrix sgd_step(const Matrix& w, const Matrix& g, const Hyperparams& hp) {
  require_same_shape(w, g, "sgd_step");
  return w - hp.learning_rate * g;
}

AdamCorrection adam_correct(const Matrix& g, const AdamMoments& moments,
                            const Hyperparams& hp) {
  AdamMoments next = moments;
  if (next.m_first.empty() && next.v_second.empty()) {
    next = AdamMoments::zeros(g.rows(), g.cols());
    next.step_count = moments.step_count;
  }
  require_same_shape(next.m_first, g, "adam_correct");
  require_same_shape(next.v_second, g, "adam_correct");
  if (next.step_count < 0) throw ParameterError("adam_correct: negative step count");

  next.step_count += 1;
  const double t = static_cast<double>(next.step_count);
  const double correction =
      std::sqrt(1.0 - std::pow(hp.beta2, t)) / (1.0 - std::pow(hp.beta1, t));

  Matrix direction(g.rows(), g.cols());
  auto gd = g.data();
  auto md = next.m_first.data();
  auto vd = next.v_second.data();
  auto out = direction.data();
  for (std::size_t i = 0; i < gd.size(); ++i) {
    md[i] = hp.beta1 * md[i] + (1.0 - hp.beta1) * gd[i];
    vd[i] = hp.beta2 * vd[i] + (1.0 - hp.beta2) * gd[i] * gd[i];
    out[i] = correction * md[i] / (std::sqrt(vd[i]) + hp.epsilon);
  }
  return {std::move(direction), std::move(next)};
}

AdamStep adam_step(const Matrix& w, const Matrix& g, const AdamMoments& moments,
                   const Hyperparams& hp) {
  require_same_shape(w, g, "adam_step");
  AdamCorrection c = adam_correct(g, moments, hp);
  StepDiagnostics diag{frobenius_norm(g), 0.0,
                       scaling_factor_matrix(c.direction, g, hp.epsilon)};
  return {w - hp.learning_rate * c.direction, std::move(c.moments), diag};
}

ProjectedStep galore_step(const Matrix& w, const Matrix& g,
                          const std::optional<GradProjector>& proj,
                          const AdamMoments& moments, const Hyperparams& hp,
                          std::int64_t step) {
  LowRankPart part = low_rank_adam(w, g, proj, moments, hp, step);
  Matrix update = project_back(part.projector, from_left_frame(part.projector, part.corrected));
  StepDiagnostics diag{frobenius_norm(g), 0.0,
                       scaling_factor_matrix(part.corrected, part.low_rank, hp.epsilon)};
  return {w - (hp.learning_rate * hp.galore_scale) * update, std::move(part.moments),
          std::move(part.projector), diag};
}

ProjectedStep galore_add_step(const Matrix& w, const Matrix& g,
                              const std::optional<GradProjector>& proj,
                              const AdamMoments& moments, const Hyperparams& hp,
                              std::int64_t step) {
  LowRankPart part = low_rank_adam(w, g, proj, moments, hp, step);
  const Matrix r_public = from_left_frame(part.projector, part.low_rank);
  Matrix s = residual(part.projector, g, r_public);
  Matrix update = hp.galore_scale *
                  project_back(part.projector, from_left_frame(part.projector, part.corrected));
  update += (hp.galore_add_scale_residual ? hp.galore_scale : 1.0) * s;
  StepDiagnostics diag{frobenius_norm(g), frobenius_norm(s),
                       scaling_factor_matrix(part.corrected, part.low_rank, hp.epsilon)};
  return {w - hp.learning_rate * update, std::move(part.moments), std::move(part.projector),
          diag};
}

double scaling_factor_matrix(const Matrix& n_corr, const Matrix& r_mat, double eps) {
  require_same_shape(n_corr, r_mat, "scaling_factor_matrix");
  return frobenius_norm(n_corr) / (frobenius_norm(r_mat) + eps);
}

std::vector<double> scaling_factor_columns(const Matrix& n_corr, const Matrix& r_mat,
                                           double eps) {
  if (n_corr.cols() != r_mat.cols()) {
    throw ParameterError("scaling_factor_columns: column count mismatch");
  }
  std::vector<double> k = column_norms(n_corr);
  const std::vector<double> rn = column_norms(r_mat);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] /= rn[i] + eps;
  return k;
}

Matrix apply_column_scaling(const Matrix& s, const std::vector<double>& k) {
  if (k.size() != s.cols()) throw ParameterError("apply_column_scaling: length mismatch");
  Matrix out = s;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= k[c];
  }
  return out;
}

LimitedResidual norm_growth_limit(const Matrix& s, std::optional<double> prev_norm,
                                  double gamma, double eps) {
  if (!(gamma > 1.0)) throw ParameterError("norm_growth_limit: gamma must be > 1");
  const double current = frobenius_norm(s);
  if (!prev_norm) return {s, current};
  if (*prev_norm < 0.0) throw ParameterError("norm_growth_limit: negative previous norm");
  const double ratio = current / (*prev_norm + eps);
  Matrix limited = s * (gamma / std::max(ratio, gamma));
  const double limited_norm = frobenius_norm(limited);
  return {std::move(limited), limited_norm};
}

Matrix gradient_clip(const Matrix& s, double threshold) {
  if (!(threshold > 0.0)) throw ParameterError("gradient_clip: threshold must be > 0");
  const double n = frobenius_norm(s);
  if (n <= threshold) return s;
  return s * (threshold / n);
}

FiraStep fira_step(const Matrix& w, const Matrix& g, const std::optional<GradProjector>& proj,
                   const FiraState& state, const Hyperparams& hp, std::int64_t step) {
  LowRankPart part = low_rank_adam(w, g, proj, state.moments, hp, step);
  const GradProjector& p = part.projector;

  Matrix s = to_left_frame(p, residual(p, g, from_left_frame(p, part.low_rank)));

  const double phi = scaling_factor_matrix(part.corrected, part.low_rank, hp.epsilon);
  switch (state.scaling_mode) {
    case ScalingMode::None:
      break;
    case ScalingMode::MatrixLevel:
      s *= phi;
      break;
    case ScalingMode::ColumnLevel:
      s = apply_column_scaling(s, scaling_factor_columns(part.corrected, part.low_rank,
                                                         hp.epsilon));
      break;
  }

  double smoothed_norm = 0.0;
  switch (state.smoothing_mode) {
    case SmoothingMode::None:
      smoothed_norm = frobenius_norm(s);
      break;
    case SmoothingMode::NormGrowthLimiter: {
      LimitedResidual lim =
          norm_growth_limit(s, state.prev_residual_norm, hp.limiter_threshold, hp.epsilon);
      s = std::move(lim.residual);
      smoothed_norm = lim.norm;
      break;
    }
    case SmoothingMode::GradientClipping:
      s = gradient_clip(s, hp.clip_threshold);
      smoothed_norm = frobenius_norm(s);
      break;
  }

  Matrix update = project_back(p, from_left_frame(p, part.corrected));
  update += from_left_frame(p, s);
  update *= hp.galore_scale;

  FiraState next_state{std::move(part.moments), smoothed_norm, state.scaling_mode,
                       state.smoothing_mode};
  StepDiagnostics diag{frobenius_norm(g), smoothed_norm, phi};
  return {w - hp.learning_rate * update, std::move(next_state), std::move(part.projector), diag};
}

double warmup_learning_rate(double base, double fraction, std::int64_t step,
                            std::int64_t total_steps) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ParameterError("warmup fraction must be in [0, 1]");
  }
  const auto warm = static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(total_steps)));
  if (warm <= 0 || step >= warm) return base;
  return base * static_cast<double>(step + 1) / static_cast<double>(warm);
}

}  // namespace fira
