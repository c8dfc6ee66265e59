#include "fira/models.hpp"

#include <algorithm>
#include <cmath>

#include "fira/error.hpp"

namespace fira {

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Tanh: return std::tanh(z);
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
  }
  return z;
}

double activate_derivative(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

Matrix affine(const DenseLayer& layer, const Matrix& x) {
  Matrix z = matmul(layer.weight, x);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += layer.bias[r];
  }
  return z;
}

void check_io(const MlpModel& model, const Matrix& inputs, const Matrix* targets) {
  if (inputs.rows() != model.input_size()) {
    throw ParameterError("model: input has " + std::to_string(inputs.rows()) +
                         " features, expected " + std::to_string(model.input_size()));
  }
  if (targets && (targets->rows() != model.output_size() || targets->cols() != inputs.cols())) {
    throw ParameterError("model: target shape does not match predictions");
  }
}

// Per-column log-softmax.
Matrix log_softmax(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (std::size_t c = 0; c < z.cols(); ++c) {
    double mx = z(0, c);
    for (std::size_t r = 1; r < z.rows(); ++r) mx = std::max(mx, z(r, c));
    double sum = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) sum += std::exp(z(r, c) - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t r = 0; r < z.rows(); ++r) out(r, c) = z(r, c) - lse;
  }
  return out;
}

// Loss value and dLoss/dpred.
std::pair<double, Matrix> loss_and_seed(Loss loss, const Matrix& pred, const Matrix& targets) {
  const double batch = static_cast<double>(pred.cols());
  Matrix seed(pred.rows(), pred.cols());
  double value = 0.0;
  if (loss == Loss::MeanSquaredError) {
    for (std::size_t r = 0; r < pred.rows(); ++r) {
      for (std::size_t c = 0; c < pred.cols(); ++c) {
        const double d = pred(r, c) - targets(r, c);
        value += d * d;
        seed(r, c) = 2.0 * d / batch;
      }
    }
    return {value / batch, std::move(seed)};
  }
  const Matrix logp = log_softmax(pred);
  for (std::size_t c = 0; c < pred.cols(); ++c) {
    double mass = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) mass += targets(r, c);
    for (std::size_t r = 0; r < pred.rows(); ++r) {
      value -= targets(r, c) * logp(r, c);
      seed(r, c) = (std::exp(logp(r, c)) * mass - targets(r, c)) / batch;
    }
  }
  return {value / batch, std::move(seed)};
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
  }
  return "?";
}

std::string to_string(Loss l) {
  return l == Loss::MeanSquaredError ? "mse" : "softmax-ce";
}

Activation parse_activation(const std::string& text) {
  if (text == "identity") return Activation::Identity;
  if (text == "tanh") return Activation::Tanh;
  if (text == "relu") return Activation::ReLU;
  throw ParameterError("unknown activation '" + text + "' (identity|tanh|relu)");
}

Loss parse_loss(const std::string& text) {
  if (text == "mse") return Loss::MeanSquaredError;
  if (text == "softmax-ce") return Loss::SoftmaxCrossEntropy;
  throw ParameterError("unknown loss '" + text + "' (mse|softmax-ce)");
}

MlpModel::MlpModel(std::vector<DenseLayer> layers, Activation activation, Loss loss)
    : layers_(std::move(layers)), activation_(activation), loss_(loss) {
  if (layers_.empty()) throw ParameterError("MlpModel: no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].bias.size() != layers_[i].weight.rows()) {
      throw ParameterError("MlpModel: bias length mismatch in layer " + std::to_string(i));
    }
    if (i > 0 && layers_[i].weight.cols() != layers_[i - 1].weight.rows()) {
      throw ParameterError("MlpModel: layer " + std::to_string(i) +
                           " does not compose with its predecessor");
    }
  }
}

MlpModel MlpModel::init(const std::vector<std::size_t>& widths, Activation activation,
                        Loss loss, Rng& rng) {
  if (widths.size() < 2) throw ParameterError("MlpModel::init: need at least two widths");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i + 1] == 0) throw ParameterError("MlpModel::init: zero width");
    const double stddev = 1.0 / std::sqrt(static_cast<double>(widths[i]));
    layers.push_back({rng.gaussian_matrix(widths[i + 1], widths[i], stddev),
                      std::vector<double>(widths[i + 1], 0.0)});
  }
  return MlpModel(std::move(layers), activation, loss);
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  check_io(model, inputs, nullptr);
  Matrix a = inputs;
  const auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix z = affine(layers[i], a);
    if (i + 1 < layers.size()) {
      for (double& x : z.data()) x = activate(model.activation(), x);
    }
    a = std::move(z);
  }
  return a;
}

double evaluate_loss(const MlpModel& model, const Matrix& inputs, const Matrix& targets) {
  check_io(model, inputs, &targets);
  return loss_and_seed(model.loss(), forward(model, inputs), targets).first;
}

LossAndGradients backward(const MlpModel& model, const Matrix& inputs, const Matrix& targets) {
  check_io(model, inputs, &targets);
  const auto& layers = model.layers();
  const std::size_t depth = layers.size();

  // acts[i] is the input to layer i; pre[i] its pre-activation output.
  std::vector<Matrix> acts{inputs};
  std::vector<Matrix> pre;
  for (std::size_t i = 0; i < depth; ++i) {
    pre.push_back(affine(layers[i], acts.back()));
    Matrix a = pre.back();
    if (i + 1 < depth) {
      for (double& x : a.data()) x = activate(model.activation(), x);
    }
    acts.push_back(std::move(a));
  }

  auto [value, delta] = loss_and_seed(model.loss(), acts.back(), targets);
  LossAndGradients out;
  out.loss = value;
  out.grads.weights.resize(depth);
  out.grads.biases.resize(depth);
  for (std::size_t li = depth; li-- > 0;) {
    out.grads.weights[li] = matmul_nt(delta, acts[li]);
    std::vector<double> db(delta.rows(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      for (std::size_t c = 0; c < delta.cols(); ++c) db[r] += delta(r, c);
    }
    out.grads.biases[li] = std::move(db);
    if (li == 0) break;
    Matrix upstream = matmul_tn(layers[li].weight, delta);
    const Matrix& z = pre[li - 1];
    for (std::size_t r = 0; r < upstream.rows(); ++r) {
      for (std::size_t c = 0; c < upstream.cols(); ++c) {
        upstream(r, c) *= activate_derivative(model.activation(), z(r, c));
      }
    }
    delta = std::move(upstream);
  }
  return out;
}

Gradients finite_diff_grad(const MlpModel& model, const Matrix& inputs, const Matrix& targets,
                           double h) {
  if (!(h > 0.0)) throw ParameterError("finite_diff_grad: h must be > 0");
  MlpModel probe = model;
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + h;
    const double plus = evaluate_loss(probe, inputs, targets);
    slot = saved - h;
    const double minus = evaluate_loss(probe, inputs, targets);
    slot = saved;
    return (plus - minus) / (2.0 * h);
  };
  Gradients out;
  for (auto& layer : probe.layers()) {
    Matrix gw(layer.weight.rows(), layer.weight.cols());
    for (std::size_t r = 0; r < gw.rows(); ++r) {
      for (std::size_t c = 0; c < gw.cols(); ++c) gw(r, c) = central(layer.weight(r, c));
    }
    std::vector<double> gb(layer.bias.size());
    for (std::size_t r = 0; r < gb.size(); ++r) gb[r] = central(layer.bias[r]);
    out.weights.push_back(std::move(gw));
    out.biases.push_back(std::move(gb));
  }
  return out;
}

double relative_error(const Matrix& a, const Matrix& b, double floor) {
  const double diff = frobenius_norm(a - b);
  return diff / std::max(frobenius_norm(a) + frobenius_norm(b), floor);
}

Matrix LoraAdapter::effective() const { return base + matmul(up, down); }

LoraAdapter LoraAdapter::init(const Matrix& base, std::size_t rank, Rng& rng) {
  if (rank < 1 || rank > std::min(base.rows(), base.cols())) {
    throw ParameterError("LoraAdapter::init: rank out of range");
  }
  const double stddev = 1.0 / std::sqrt(static_cast<double>(base.cols()));
  return {base, rng.gaussian_matrix(rank, base.cols(), stddev), Matrix(base.rows(), rank)};
}

LoraGradients lora_gradients(const LoraAdapter& adapter, const Matrix& g_effective) {
  if (!g_effective.same_shape(adapter.base)) {
    throw ParameterError("lora_gradients: gradient shape does not match the base weight");
  }
  return {matmul_tn(adapter.up, g_effective), matmul_nt(g_effective, adapter.down)};
}

LoraStep lora_step(const LoraAdapter& adapter, const Matrix& g_effective,
                   const AdamMoments& down_moments, const AdamMoments& up_moments,
                   const Hyperparams& hp) {
  LoraGradients grads = lora_gradients(adapter, g_effective);
  AdamCorrection down = adam_correct(grads.down, down_moments, hp);
  AdamCorrection up = adam_correct(grads.up, up_moments, hp);

  LoraAdapter next = adapter;
  next.down -= hp.learning_rate * down.direction;
  next.up -= hp.learning_rate * up.direction;

  const double corrected =
      std::hypot(frobenius_norm(down.direction), frobenius_norm(up.direction));
  const double raw = std::hypot(frobenius_norm(grads.down), frobenius_norm(grads.up));
  StepDiagnostics diag{frobenius_norm(g_effective), 0.0, corrected / (raw + hp.epsilon)};
  return {std::move(next), std::move(down.moments), std::move(up.moments), diag};
}

}  // namespace fira
