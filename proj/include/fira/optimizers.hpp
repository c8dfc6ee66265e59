#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fira/linalg.hpp"
#include "fira/projector.hpp"

namespace fira {

enum class ScalingMode { None, MatrixLevel, ColumnLevel };
enum class SmoothingMode { None, NormGrowthLimiter, GradientClipping };

std::string to_string(ScalingMode mode);
std::string to_string(SmoothingMode mode);
ScalingMode parse_scaling_mode(const std::string& text);
SmoothingMode parse_smoothing_mode(const std::string& text);

struct Hyperparams {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // alpha: multiplies the projected-back update (and the residual term).
  double galore_scale = 0.25;
  // gamma: maximum step-to-step growth ratio of the residual norm.
  double limiter_threshold = 1.01;
  // Absolute norm cap used by the clipping ablation.
  double clip_threshold = 1.0;
  std::size_t rank = 4;
  std::size_t switch_period = 200;
  // Whether GaLore-add multiplies its raw residual by alpha as well.
  bool galore_add_scale_residual = true;

  // Throws ParameterError on violated ranges.
  void validate() const;
};

struct AdamMoments {
  Matrix m_first;
  Matrix v_second;
  std::int64_t step_count = 0;

  static AdamMoments zeros(std::size_t rows, std::size_t cols);
  bool operator==(const AdamMoments&) const = default;
};

struct FiraState {
  AdamMoments moments;
  // Norm of the previous smoothed residual; empty before the first step.
  std::optional<double> prev_residual_norm;
  ScalingMode scaling_mode = ScalingMode::ColumnLevel;
  SmoothingMode smoothing_mode = SmoothingMode::NormGrowthLimiter;

  bool operator==(const FiraState&) const = default;
};

// Per-step quantities recorded in training traces.
struct StepDiagnostics {
  double grad_norm = 0.0;
  // Norm of the residual term that entered the update (0 if discarded).
  double residual_norm = 0.0;
  // Matrix-level scaling factor ||psi(R)|| / (||R|| + eps).
  double scaling_factor = 0.0;
};

struct AdamCorrection {
  Matrix direction;  // psi(G)
  AdamMoments moments;
};

struct AdamStep {
  Matrix weights;
  AdamMoments moments;
  StepDiagnostics diagnostics;
};

struct ProjectedStep {
  Matrix weights;
  AdamMoments moments;
  GradProjector projector;
  StepDiagnostics diagnostics;
};

struct FiraStep {
  Matrix weights;
  FiraState state;
  GradProjector projector;
  StepDiagnostics diagnostics;
};

struct LimitedResidual {
  Matrix residual;
  double norm;  // becomes the next step's previous norm
};

Matrix sgd_step(const Matrix& w, const Matrix& g, const Hyperparams& hp);

// One Adam moment update followed by the bias-corrected direction
//   psi = sqrt(1 - beta2^t) / (1 - beta1^t) * M / (sqrt(V) + eps)
// with t the incremented step count. Empty moments are zero-initialized to
// the shape of `g`.
AdamCorrection adam_correct(const Matrix& g, const AdamMoments& moments, const Hyperparams& hp);

AdamStep adam_step(const Matrix& w, const Matrix& g, const AdamMoments& moments,
                   const Hyperparams& hp);

// W <- W - lr * alpha * P psi(P^T G). The projector is refreshed from `g`
// every hp.switch_period steps; moments carry across refreshes.
ProjectedStep galore_step(const Matrix& w, const Matrix& g,
                          const std::optional<GradProjector>& proj, const AdamMoments& moments,
                          const Hyperparams& hp, std::int64_t step);

// GaLore plus the raw residual (G - P R), uncorrected.
ProjectedStep galore_add_step(const Matrix& w, const Matrix& g,
                              const std::optional<GradProjector>& proj,
                              const AdamMoments& moments, const Hyperparams& hp,
                              std::int64_t step);

double scaling_factor_matrix(const Matrix& n_corr, const Matrix& r_mat, double eps);
std::vector<double> scaling_factor_columns(const Matrix& n_corr, const Matrix& r_mat,
                                           double eps);
Matrix apply_column_scaling(const Matrix& s, const std::vector<double>& k);

// Caps ||S_t|| / (||S_{t-1}|| + eps) at gamma. The first call (no previous
// norm) passes `s` through.
LimitedResidual norm_growth_limit(const Matrix& s, std::optional<double> prev_norm,
                                  double gamma, double eps);

Matrix gradient_clip(const Matrix& s, double threshold);

// One step of Fira with Adam: refresh, split G into P R + S, Adam on R,
// norm-based scaling of S, smoothing of S, then
//   W <- W - lr * alpha * (P N + S).
FiraStep fira_step(const Matrix& w, const Matrix& g, const std::optional<GradProjector>& proj,
                   const FiraState& state, const Hyperparams& hp, std::int64_t step);

// Linear warm-up over the first ceil(fraction * total_steps) steps.
double warmup_learning_rate(double base, double fraction, std::int64_t step,
                            std::int64_t total_steps);

}  // namespace fira
