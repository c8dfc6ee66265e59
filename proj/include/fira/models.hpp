#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fira/linalg.hpp"
#include "fira/optimizers.hpp"
#include "fira/random.hpp"

namespace fira {

enum class Activation { Identity, Tanh, ReLU };
enum class Loss { MeanSquaredError, SoftmaxCrossEntropy };

std::string to_string(Activation a);
std::string to_string(Loss l);
Activation parse_activation(const std::string& text);
Loss parse_loss(const std::string& text);

struct DenseLayer {
  Matrix weight;              // out x in
  std::vector<double> bias;   // out
};

// Fully connected network. Hidden layers apply the activation; the last
// layer is linear. Inputs and targets hold one sample per column.
//
// MSE:  loss = (1/batch) * sum over samples and outputs of (pred - target)^2
// CE:   loss = -(1/batch) * sum target * log softmax(pred)
class MlpModel {
 public:
  MlpModel(std::vector<DenseLayer> layers, Activation activation, Loss loss);

  // widths = {input, hidden..., output}; weights ~ N(0, 1/fan_in), zero bias.
  static MlpModel init(const std::vector<std::size_t>& widths, Activation activation,
                       Loss loss, Rng& rng);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  Activation activation() const { return activation_; }
  Loss loss() const { return loss_; }
  std::size_t input_size() const { return layers_.front().weight.cols(); }
  std::size_t output_size() const { return layers_.back().weight.rows(); }

 private:
  std::vector<DenseLayer> layers_;
  Activation activation_;
  Loss loss_;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

Matrix forward(const MlpModel& model, const Matrix& inputs);
double evaluate_loss(const MlpModel& model, const Matrix& inputs, const Matrix& targets);
LossAndGradients backward(const MlpModel& model, const Matrix& inputs, const Matrix& targets);

// Central differences, step h, for every weight and bias entry.
Gradients finite_diff_grad(const MlpModel& model, const Matrix& inputs, const Matrix& targets,
                           double h = 1e-6);

// ||a - b||_F / max(||a||_F + ||b||_F, floor)
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-12);

// Frozen base plus trainable low-rank product: W = W0 + B A.
struct LoraAdapter {
  Matrix base;  // W0, m x n
  Matrix down;  // A, r x n
  Matrix up;    // B, m x r

  std::size_t rank() const { return down.rows(); }
  Matrix effective() const;

  // A ~ N(0, 1/n), B = 0.
  static LoraAdapter init(const Matrix& base, std::size_t rank, Rng& rng);
};

struct LoraGradients {
  Matrix down;  // B^T G
  Matrix up;    // G A^T
};

LoraGradients lora_gradients(const LoraAdapter& adapter, const Matrix& g_effective);

struct LoraStep {
  LoraAdapter adapter;
  AdamMoments down_moments;
  AdamMoments up_moments;
  StepDiagnostics diagnostics;
};

// Adam on A and B with chain-rule gradients; W0 is never touched.
LoraStep lora_step(const LoraAdapter& adapter, const Matrix& g_effective,
                   const AdamMoments& down_moments, const AdamMoments& up_moments,
                   const Hyperparams& hp);

}  // namespace fira
