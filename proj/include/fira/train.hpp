#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fira/linalg.hpp"
#include "fira/models.hpp"
#include "fira/optimizers.hpp"

namespace fira {

enum class TaskKind { MatrixFactorization, RegressionMlp, SpikeInjected };
enum class OptimizerKind { Sgd, Adam, Galore, GaloreAdd, Fira, Lora };

std::string to_string(TaskKind kind);
std::string to_string(OptimizerKind kind);
TaskKind parse_task_kind(const std::string& text);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct SpikeEvent {
  std::int64_t step = 0;
  double amplification = 1.0;
  bool operator==(const SpikeEvent&) const = default;
};

struct TaskSpec {
  TaskKind kind = TaskKind::MatrixFactorization;
  // MatrixFactorization: fit Y = M X with a product of square d x d layers.
  std::size_t dim = 16;
  // Regression / spike tasks: input and output widths; the teacher network
  // has one tanh hidden layer of teacher_hidden units.
  std::size_t input_dim = 16;
  std::size_t output_dim = 8;
  std::size_t teacher_hidden = 32;
  std::size_t batch = 64;
  // Standard deviation of Gaussian target noise.
  double noise = 0.0;
  // Gradient amplification of one matrix at chosen steps.
  std::vector<SpikeEvent> spikes;
  std::size_t spike_matrix = 0;
};

struct SyntheticTask {
  TaskKind kind;
  Matrix inputs;   // features x batch
  Matrix targets;  // outputs x batch
  std::uint64_t seed;
  std::vector<SpikeEvent> spike_schedule;
  std::size_t spike_matrix;
};

// Deterministic in (spec, seed).
SyntheticTask make_task(const TaskSpec& spec, Loss loss, std::uint64_t seed);

struct ModelSpec {
  // Hidden widths; empty selects the task's default (two d x d layers for
  // matrix factorization, one hidden layer of 32 otherwise).
  std::vector<std::size_t> hidden;
  Activation activation = Activation::Identity;
  Loss loss = Loss::MeanSquaredError;
};

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::Fira;
  Hyperparams hp;
  ScalingMode scaling = ScalingMode::ColumnLevel;
  SmoothingMode smoothing = SmoothingMode::NormGrowthLimiter;
};

struct TrainConfig {
  TaskSpec task;
  ModelSpec model;
  OptimizerSpec optimizer;
  std::int64_t steps = 2000;
  std::uint64_t seed = 1;
  double warmup_fraction = 0.1;

  // Throws ConfigError.
  void validate() const;
};

// Layer widths the configured model will use.
std::vector<std::size_t> model_widths(const TrainConfig& config);

struct MatrixTrace {
  double grad_norm = 0.0;
  double resid_norm = 0.0;
  double phi = 0.0;
  bool operator==(const MatrixTrace&) const = default;
};

struct TrainRow {
  std::int64_t step = 0;
  double loss = 0.0;  // before the update at `step`
  std::vector<MatrixTrace> matrices;
  bool operator==(const TrainRow&) const = default;
};

struct TrainRecord {
  std::vector<std::string> matrix_names;
  double initial_loss = 0.0;
  double final_loss = 0.0;  // after the last update
  std::vector<TrainRow> rows;
  bool diverged = false;

  bool operator==(const TrainRecord&) const = default;
};

struct TrainSummary {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double min_loss = 0.0;
  std::int64_t steps = 0;
  // Steps whose loss is more than twice the previous step's.
  std::int64_t spike_count = 0;
};

TrainSummary summarize(const TrainRecord& record);

// Raised when the loss becomes non-finite; carries the trace so far.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, TrainRecord partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const TrainRecord& partial() const { return partial_; }

 private:
  TrainRecord partial_;
};

TrainRecord train(const TrainConfig& config);

// metrics.csv: step,loss,<name>_grad_norm,<name>_resid_norm,<name>_phi,...
void write_train_csv(std::ostream& out, const TrainRecord& record);
// Reads matrix names and rows back; initial/final loss are not part of the
// CSV and are left at zero.
TrainRecord read_train_csv(std::istream& in);

// Mean phi of each matrix over all rows.
std::vector<double> average_scaling_factors(const TrainRecord& record);

}  // namespace fira
