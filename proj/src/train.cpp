#include "fira/train.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "fira/error.hpp"
#include "fira/projector.hpp"
#include "fira/random.hpp"

namespace fira {

namespace {

enum Stream : std::uint64_t { kData = 1, kInit = 2, kLora = 3 };

Matrix softmax_columns(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (std::size_t c = 0; c < z.cols(); ++c) {
    double mx = z(0, c);
    for (std::size_t r = 1; r < z.rows(); ++r) mx = std::max(mx, z(r, c));
    double sum = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) sum += std::exp(z(r, c) - mx);
    for (std::size_t r = 0; r < z.rows(); ++r) out(r, c) = std::exp(z(r, c) - mx) / sum;
  }
  return out;
}

// Optimizer state owned by one weight matrix.
struct MatrixSlot {
  std::size_t rank = 1;
  AdamMoments moments;
  FiraState fira;
  std::optional<GradProjector> projector;
  std::optional<LoraAdapter> adapter;
  AdamMoments down_moments;
  AdamMoments up_moments;
};

bool is_finite(double x) { return std::isfinite(x); }

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::MatrixFactorization: return "matrix-factorization";
    case TaskKind::RegressionMlp: return "regression-mlp";
    case TaskKind::SpikeInjected: return "spike-injected";
  }
  return "?";
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Galore: return "galore";
    case OptimizerKind::GaloreAdd: return "galore-add";
    case OptimizerKind::Fira: return "fira";
    case OptimizerKind::Lora: return "lora";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "matrix-factorization") return TaskKind::MatrixFactorization;
  if (text == "regression-mlp") return TaskKind::RegressionMlp;
  if (text == "spike-injected") return TaskKind::SpikeInjected;
  throw ParameterError("unknown task kind '" + text +
                       "' (matrix-factorization|regression-mlp|spike-injected)");
}

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "sgd") return OptimizerKind::Sgd;
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "galore") return OptimizerKind::Galore;
  if (text == "galore-add") return OptimizerKind::GaloreAdd;
  if (text == "fira") return OptimizerKind::Fira;
  if (text == "lora") return OptimizerKind::Lora;
  throw ParameterError("unknown optimizer kind '" + text +
                       "' (sgd|adam|galore|galore-add|fira|lora)");
}

SyntheticTask make_task(const TaskSpec& spec, Loss loss, std::uint64_t seed) {
  Rng data = Rng(seed).split(kData);
  Rng input_rng = data.split(1);
  Rng truth_rng = data.split(2);
  Rng noise_rng = data.split(3);

  SyntheticTask task{spec.kind, {}, {}, seed, {}, spec.spike_matrix};
  Matrix clean;
  if (spec.kind == TaskKind::MatrixFactorization) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(spec.dim));
    const Matrix truth = truth_rng.gaussian_matrix(spec.dim, spec.dim, stddev);
    task.inputs = input_rng.gaussian_matrix(spec.dim, spec.batch);
    clean = matmul(truth, task.inputs);
  } else {
    MlpModel teacher = MlpModel::init({spec.input_dim, spec.teacher_hidden, spec.output_dim},
                                      Activation::Tanh, Loss::MeanSquaredError, truth_rng);
    for (auto& layer : teacher.layers()) {
      for (double& b : layer.bias) b = 0.1 * truth_rng.normal();
    }
    task.inputs = input_rng.gaussian_matrix(spec.input_dim, spec.batch);
    clean = forward(teacher, task.inputs);
  }
  if (spec.noise > 0.0) {
    for (double& x : clean.data()) x += spec.noise * noise_rng.normal();
  }
  task.targets = loss == Loss::SoftmaxCrossEntropy ? softmax_columns(clean) : std::move(clean);
  if (spec.kind == TaskKind::SpikeInjected) task.spike_schedule = spec.spikes;
  return task;
}

std::vector<std::size_t> model_widths(const TrainConfig& config) {
  const TaskSpec& t = config.task;
  const bool mf = t.kind == TaskKind::MatrixFactorization;
  std::vector<std::size_t> widths{mf ? t.dim : t.input_dim};
  const std::vector<std::size_t> hidden =
      config.model.hidden.empty() ? std::vector<std::size_t>{mf ? t.dim : std::size_t{32}}
                                  : config.model.hidden;
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(mf ? t.dim : t.output_dim);
  return widths;
}

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
    throw ConfigError("warmup_fraction must be in [0, 1]");
  }
  if (task.batch == 0) throw ConfigError("task batch must be >= 1");
  if (task.kind == TaskKind::MatrixFactorization) {
    if (task.dim == 0) throw ConfigError("task dim must be >= 1");
  } else if (task.input_dim == 0 || task.output_dim == 0 || task.teacher_hidden == 0) {
    throw ConfigError("task widths must be >= 1");
  }
  if (!(task.noise >= 0.0) || !std::isfinite(task.noise)) {
    throw ConfigError("task noise must be finite and >= 0");
  }
  for (std::size_t h : model.hidden) {
    if (h == 0) throw ConfigError("hidden widths must be >= 1");
  }
  const std::size_t matrices = model_widths(*this).size() - 1;
  if (task.spike_matrix >= matrices) {
    throw ConfigError("spike_matrix " + std::to_string(task.spike_matrix) +
                      " out of range (model has " + std::to_string(matrices) + " matrices)");
  }
  for (const SpikeEvent& e : task.spikes) {
    if (e.step < 0 || !std::isfinite(e.amplification)) {
      throw ConfigError("spike events need a non-negative step and finite amplification");
    }
  }
  try {
    optimizer.hp.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
}

TrainSummary summarize(const TrainRecord& record) {
  TrainSummary s;
  s.initial_loss = record.initial_loss;
  s.final_loss = record.final_loss;
  s.steps = static_cast<std::int64_t>(record.rows.size());
  std::vector<double> losses;
  for (const TrainRow& row : record.rows) losses.push_back(row.loss);
  if (!record.diverged) losses.push_back(record.final_loss);
  s.min_loss = losses.empty() ? record.initial_loss : losses.front();
  for (std::size_t i = 0; i < losses.size(); ++i) {
    s.min_loss = std::min(s.min_loss, losses[i]);
    if (i > 0 && losses[i] > 2.0 * losses[i - 1]) ++s.spike_count;
  }
  return s;
}

TrainRecord train(const TrainConfig& config) {
  config.validate();
  const OptimizerSpec& opt = config.optimizer;
  const std::vector<std::size_t> widths = model_widths(config);

  Rng root(config.seed);
  SyntheticTask task = make_task(config.task, config.model.loss, config.seed);
  Rng init_rng = root.split(kInit);
  Rng lora_rng = root.split(kLora);
  MlpModel model = MlpModel::init(widths, config.model.activation, config.model.loss, init_rng);

  const std::size_t count = model.layers().size();
  std::vector<MatrixSlot> slots(count);
  std::vector<AdamMoments> bias_moments(count);
  TrainRecord record;
  for (std::size_t i = 0; i < count; ++i) {
    const Matrix& w = model.layers()[i].weight;
    record.matrix_names.push_back("layer" + std::to_string(i));
    // Rank is capped at the matrix's full-rank dimension.
    slots[i].rank = std::min(opt.hp.rank, std::min(w.rows(), w.cols()));
    slots[i].fira.scaling_mode = opt.scaling;
    slots[i].fira.smoothing_mode = opt.smoothing;
    if (opt.kind == OptimizerKind::Lora) {
      slots[i].adapter = LoraAdapter::init(w, slots[i].rank, lora_rng);
    }
  }

  record.initial_loss = evaluate_loss(model, task.inputs, task.targets);
  if (!is_finite(record.initial_loss)) {
    record.diverged = true;
    throw DivergenceError("initial loss is not finite", record);
  }

  for (std::int64_t step = 0; step < config.steps; ++step) {
    LossAndGradients lg = backward(model, task.inputs, task.targets);
    if (!is_finite(lg.loss)) {
      record.diverged = true;
      throw DivergenceError("loss became non-finite at step " + std::to_string(step), record);
    }
    for (const SpikeEvent& e : task.spike_schedule) {
      if (e.step == step) lg.grads.weights[task.spike_matrix] *= e.amplification;
    }

    Hyperparams hp = opt.hp;
    hp.learning_rate =
        warmup_learning_rate(opt.hp.learning_rate, config.warmup_fraction, step, config.steps);

    TrainRow row{step, lg.loss, {}};
    for (std::size_t i = 0; i < count; ++i) {
      DenseLayer& layer = model.layers()[i];
      const Matrix& g = lg.grads.weights[i];
      MatrixSlot& slot = slots[i];
      Hyperparams local = hp;
      local.rank = slot.rank;
      StepDiagnostics diag;
      switch (opt.kind) {
        case OptimizerKind::Sgd:
          layer.weight = sgd_step(layer.weight, g, local);
          diag = {frobenius_norm(g), 0.0, 1.0};
          break;
        case OptimizerKind::Adam: {
          AdamStep s = adam_step(layer.weight, g, slot.moments, local);
          layer.weight = std::move(s.weights);
          slot.moments = std::move(s.moments);
          diag = s.diagnostics;
          break;
        }
        case OptimizerKind::Galore:
        case OptimizerKind::GaloreAdd: {
          ProjectedStep s = opt.kind == OptimizerKind::Galore
                                ? galore_step(layer.weight, g, slot.projector, slot.moments,
                                              local, step)
                                : galore_add_step(layer.weight, g, slot.projector,
                                                  slot.moments, local, step);
          layer.weight = std::move(s.weights);
          slot.moments = std::move(s.moments);
          slot.projector = std::move(s.projector);
          diag = s.diagnostics;
          break;
        }
        case OptimizerKind::Fira: {
          FiraStep s = fira_step(layer.weight, g, slot.projector, slot.fira, local, step);
          layer.weight = std::move(s.weights);
          slot.fira = std::move(s.state);
          slot.projector = std::move(s.projector);
          diag = s.diagnostics;
          break;
        }
        case OptimizerKind::Lora: {
          LoraStep s = lora_step(*slot.adapter, g, slot.down_moments, slot.up_moments, local);
          slot.adapter = std::move(s.adapter);
          slot.down_moments = std::move(s.down_moments);
          slot.up_moments = std::move(s.up_moments);
          layer.weight = slot.adapter->effective();
          diag = s.diagnostics;
          break;
        }
      }
      row.matrices.push_back({diag.grad_norm, diag.residual_norm, diag.scaling_factor});

      // 1-D parameters bypass projection.
      const std::vector<double>& gb = lg.grads.biases[i];
      Matrix bias_grad(1, gb.size(), gb);
      Matrix bias(1, layer.bias.size(), layer.bias);
      if (opt.kind == OptimizerKind::Sgd) {
        bias = sgd_step(bias, bias_grad, local);
      } else {
        AdamStep s = adam_step(bias, bias_grad, bias_moments[i], local);
        bias = std::move(s.weights);
        bias_moments[i] = std::move(s.moments);
      }
      std::copy(bias.data().begin(), bias.data().end(), layer.bias.begin());
    }
    record.rows.push_back(std::move(row));
  }

  record.final_loss = evaluate_loss(model, task.inputs, task.targets);
  if (!is_finite(record.final_loss)) {
    record.diverged = true;
    throw DivergenceError("final loss is not finite", record);
  }
  return record;
}

std::vector<double> average_scaling_factors(const TrainRecord& record) {
  std::vector<double> sums(record.matrix_names.size(), 0.0);
  for (const TrainRow& row : record.rows) {
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += row.matrices[i].phi;
  }
  if (!record.rows.empty()) {
    for (double& s : sums) s /= static_cast<double>(record.rows.size());
  }
  return sums;
}

}  // namespace fira
