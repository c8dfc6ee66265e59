#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <tuple>

#include "fira/analysis.hpp"
#include "fira/checkpoint.hpp"
#include "fira/error.hpp"
#include "fira/random.hpp"
#include "fira/train.hpp"

using fira::Matrix;
using fira::OptimizerKind;
using fira::TrainConfig;

namespace {

TrainConfig small_config(OptimizerKind kind, std::int64_t steps) {
  TrainConfig c;
  c.task.kind = fira::TaskKind::MatrixFactorization;
  c.task.dim = 6;
  c.task.batch = 16;
  c.optimizer.kind = kind;
  c.optimizer.hp.rank = 2;
  c.optimizer.hp.switch_period = 20;
  c.steps = steps;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("zero-step run records only the initial loss") {
  const auto record = fira::train(small_config(OptimizerKind::Fira, 0));
  CHECK(record.rows.empty());
  CHECK(record.final_loss == record.initial_loss);
  CHECK(record.initial_loss > 0.0);
  const auto s = fira::summarize(record);
  CHECK(s.final_loss == s.initial_loss);
  CHECK(s.steps == 0);
}

TEST_CASE("Adam fits a noise-free factorization") {
  TrainConfig c = small_config(OptimizerKind::Adam, 2000);
  c.task.batch = 32;
  const auto record = fira::train(c);
  CHECK(record.final_loss < 1e-6 * record.initial_loss);
  CHECK(fira::model_widths(c) == std::vector<std::size_t>{6, 6, 6});
}

TEST_CASE("training is deterministic in the seed") {
  for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Galore,
                             OptimizerKind::GaloreAdd, OptimizerKind::Fira, OptimizerKind::Lora}) {
    const auto a = fira::train(small_config(kind, 50));
    const auto b = fira::train(small_config(kind, 50));
    CHECK(a == b);
    CHECK(a.rows.size() == 50);
    CHECK(a.matrix_names == std::vector<std::string>{"layer0", "layer1"});
  }
  TrainConfig other = small_config(OptimizerKind::Fira, 50);
  other.seed = 4;
  CHECK(!(fira::train(other) == fira::train(small_config(OptimizerKind::Fira, 50))));
}

TEST_CASE("every optimizer reduces the loss") {
  for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Galore,
                             OptimizerKind::GaloreAdd, OptimizerKind::Fira, OptimizerKind::Lora}) {
    const auto r = fira::train(small_config(kind, 300));
    CHECK_MESSAGE(r.final_loss < r.initial_loss, fira::to_string(kind));
  }
}

TEST_CASE("trace diagnostics") {
  const auto sgd = fira::train(small_config(OptimizerKind::Sgd, 5));
  for (const auto& row : sgd.rows)
    for (const auto& m : row.matrices) {
      CHECK(m.phi == 1.0);
      CHECK(m.resid_norm == 0.0);
      CHECK(m.grad_norm > 0.0);
    }
  const auto fira_run = fira::train(small_config(OptimizerKind::Fira, 5));
  for (const auto& row : fira_run.rows)
    for (const auto& m : row.matrices) CHECK(m.resid_norm > 0.0);
}

TEST_CASE("divergence is reported with a partial trace") {
  TrainConfig c = small_config(OptimizerKind::Sgd, 200);
  c.optimizer.hp.learning_rate = 50.0;
  c.warmup_fraction = 0.0;
  try {
    fira::train(c);
    FAIL("expected divergence");
  } catch (const fira::DivergenceError& e) {
    CHECK(e.partial().diverged);
    CHECK(e.partial().rows.size() < 200);
  }
}

TEST_CASE("config validation") {
  TrainConfig c = small_config(OptimizerKind::Fira, 10);
  c.steps = -1;
  CHECK_THROWS_AS(c.validate(), fira::ConfigError);
  c = small_config(OptimizerKind::Fira, 10);
  c.task.spike_matrix = 5;
  CHECK_THROWS_AS(c.validate(), fira::ConfigError);
  c = small_config(OptimizerKind::Fira, 10);
  c.optimizer.hp.limiter_threshold = 0.5;
  CHECK_THROWS_AS(c.validate(), fira::ConfigError);
}

TEST_CASE("spike count") {
  fira::TrainRecord r;
  r.initial_loss = 1.0;
  for (double loss : {1.0, 0.5, 1.2, 1.0, 0.4, 0.9}) r.rows.push_back({0, loss, {}});
  r.final_loss = 0.3;
  const auto s = fira::summarize(r);
  CHECK(s.spike_count == 2);
  CHECK(s.min_loss == 0.3);
}

TEST_CASE("metrics CSV round-trips") {
  const auto record = fira::train(small_config(OptimizerKind::Fira, 20));
  std::stringstream buffer;
  fira::write_train_csv(buffer, record);
  const std::string text = buffer.str();
  CHECK(text.rfind("step,loss,layer0_grad_norm,layer0_resid_norm,layer0_phi,", 0) == 0);
  const auto back = fira::read_train_csv(buffer);
  CHECK(back.matrix_names == record.matrix_names);
  CHECK(back.rows == record.rows);

  std::istringstream bad("step,loss,x\n1,2\n");
  CHECK_THROWS(fira::read_train_csv(bad));
}

TEST_CASE("scaling-factor ranking pipeline") {
  TrainConfig c;
  c.task.kind = fira::TaskKind::RegressionMlp;
  c.task.input_dim = 16;
  c.task.output_dim = 16;
  c.model.hidden = {24, 20, 16, 12, 16, 20};
  c.model.activation = fira::Activation::Tanh;
  c.steps = 300;
  c.seed = 11;
  c.optimizer.hp.rank = 16;
  const auto full = fira::train(c);
  c.optimizer.hp.rank = 4;
  const auto low = fira::train(c);
  const auto phi_full = fira::average_scaling_factors(full);
  const auto phi_low = fira::average_scaling_factors(low);
  REQUIRE(phi_full.size() == full.matrix_names.size());
  REQUIRE(phi_low.size() == phi_full.size());
  for (std::size_t i = 0; i < phi_full.size(); ++i) {
    CHECK(std::isfinite(phi_full[i]));
    CHECK(phi_full[i] > 0.0);
    // A wider subspace passes more of the gradient through Adam at once.
    CHECK(phi_full[i] > phi_low[i]);
  }
  const auto a = fira::trace_to_ranking(phi_full);
  const auto b = fira::trace_to_ranking(phi_low);
  CHECK(a.size() == phi_full.size());
  // The largest average factor gets rank 1.
  const auto top = std::max_element(phi_full.begin(), phi_full.end()) - phi_full.begin();
  CHECK(a.values()[static_cast<std::size_t>(top)] == 1);
  const double tau = fira::kendall_tau(a, b).coefficient;
  CHECK(tau >= -1.0);
  CHECK(tau <= 1.0);
}

TEST_CASE("checkpoint round trip resumes bit-identically") {
  fira::Rng rng(40);
  const Matrix w0 = rng.gaussian_matrix(5, 8);
  std::vector<Matrix> grads;
  for (int i = 0; i < 12; ++i) grads.push_back(rng.gaussian_matrix(5, 8));
  fira::Hyperparams hp;
  hp.rank = 2;
  hp.switch_period = 4;

  auto run = [&](int from, int to, Matrix w, fira::FiraState state,
                 std::optional<fira::GradProjector> proj) {
    for (int step = from; step < to; ++step) {
      auto s = fira::fira_step(w, grads[step], proj, state, hp, step);
      w = s.weights;
      state = s.state;
      proj = s.projector;
    }
    return std::make_tuple(w, state, proj);
  };

  const auto [w_full, state_full, proj_full] = run(0, 12, w0, {}, std::nullopt);
  const auto [w_mid, state_mid, proj_mid] = run(0, 7, w0, {}, std::nullopt);

  std::stringstream buffer;
  fira::write_checkpoint(buffer, fira::Checkpoint{state_mid, proj_mid});
  const fira::Checkpoint loaded = fira::read_checkpoint(buffer);
  CHECK(loaded.state == state_mid);
  CHECK(loaded.projector == proj_mid);

  const auto [w_resumed, state_resumed, proj_resumed] =
      run(7, 12, w_mid, loaded.state, loaded.projector);
  CHECK(w_resumed == w_full);
  CHECK(state_resumed == state_full);

  std::stringstream empty;
  fira::write_checkpoint(empty, fira::Checkpoint{fira::FiraState{}, std::nullopt});
  const auto e = fira::read_checkpoint(empty);
  CHECK(!e.projector);
  CHECK(!e.state.prev_residual_norm);

  std::istringstream garbage("not a checkpoint\n");
  CHECK_THROWS_AS(fira::read_checkpoint(garbage), fira::ParameterError);
}
