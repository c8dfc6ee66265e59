#include <doctest.h>

#include "fira/error.hpp"
#include "fira/memory.hpp"
#include "oracles.hpp"

using fira::ArchSpec;
using fira::MemoryMethod;

TEST_CASE("hand-enumerated tiny architecture") {
  const ArchSpec tiny{"tiny", 4, 8, 2, 1, 10, 16};
  const auto inv = fira::weight_matrix_shapes(tiny);
  std::size_t block = 0;
  for (const auto& m : inv.matrices) {
    if (m.role == fira::MatrixRole::Attention || m.role == fira::MatrixRole::Mlp) ++block;
  }
  CHECK(block == 7);
  CHECK(inv.matrices.size() == 9);
  // 4*16 attention + 2*32 gate/up + 32 down + 2*40 embed/head + 3*4 norms.
  CHECK(inv.parameter_count() == 64 + 64 + 32 + 80 + 12);
  CHECK(inv.block_parameter_count() == 64 + 64 + 32 + 8);

  // Full Adam: two state elements per parameter, two bytes each.
  const auto full = fira::estimate(tiny, MemoryMethod::FullRank, 0);
  CHECK(full.weight_bytes == 2 * 252);
  CHECK(full.optimizer_state_bytes == 4 * 252);
}

TEST_CASE("doubling the depth doubles the block parameters") {
  ArchSpec a{"a", 64, 176, 4, 3};
  ArchSpec b = a;
  b.layers = 6;
  CHECK(fira::weight_matrix_shapes(b).block_parameter_count() ==
        2 * fira::weight_matrix_shapes(a).block_parameter_count());
}

TEST_CASE("LLaMA-60M parameter count") {
  const auto arch = *fira::builtin_arch("llama-60m");
  const double params = static_cast<double>(fira::weight_matrix_shapes(arch).parameter_count());
  CHECK(params == doctest::Approx(60e6).epsilon(0.10));
}

TEST_CASE("per-matrix element counts") {
  const auto f = fira::matrix_element_counts(4, 6, MemoryMethod::Fira, 2);
  CHECK(f.states == 33);
  CHECK(f.states * fira::kBytesPerElement == 66);
  CHECK(f.weights == 24);
  const auto g = fira::matrix_element_counts(6, 4, MemoryMethod::Galore, 2);
  CHECK(g.states == 32);
  const auto l = fira::matrix_element_counts(4, 6, MemoryMethod::Lora, 2);
  CHECK(l.weights == 24 + 8 + 12);
  CHECK(l.states == 2 * 8 + 2 * 12);
  CHECK(fira::matrix_element_counts(4, 6, MemoryMethod::FullRank, 0).states == 48);
  CHECK_THROWS_AS(fira::matrix_element_counts(4, 6, MemoryMethod::Fira, 5), fira::ParameterError);
  CHECK_THROWS_AS(fira::matrix_element_counts(4, 6, MemoryMethod::Galore, 0), fira::ParameterError);
}

TEST_CASE("fira keeps one scalar more than galore per matrix") {
  for (const std::string& name : fira::builtin_arch_names()) {
    const auto arch = *fira::builtin_arch(name);
    const auto fira_est = fira::estimate(arch, MemoryMethod::Fira, 128);
    const auto galore_est = fira::estimate(arch, MemoryMethod::Galore, 128);
    const auto blocks = 7 * arch.layers;
    CHECK(fira_est.optimizer_state_bytes - galore_est.optimizer_state_bytes ==
          blocks * fira::kBytesPerElement);
  }
}

TEST_CASE("LLaMA-60M totals") {
  const auto arch = *fira::builtin_arch("llama-60m");
  CHECK(oracle::rel_close(fira::estimate(arch, MemoryMethod::FullRank, 0).total_gb(), 0.36, 0.10));
  CHECK(oracle::rel_close(fira::estimate(arch, MemoryMethod::Fira, 128).total_gb(), 0.24, 0.10));
  CHECK(fira::estimate(arch, MemoryMethod::Lora, 128).total_bytes >
        fira::estimate(arch, MemoryMethod::Galore, 128).total_bytes);
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS(fira::weight_matrix_shapes(ArchSpec{"bad", 10, 20, 3, 1}), fira::ParameterError);
  CHECK_THROWS_AS(fira::weight_matrix_shapes(ArchSpec{"bad", 0, 20, 1, 1}), fira::ParameterError);
  CHECK(!fira::builtin_arch("llama-3b"));
  CHECK_THROWS_AS(fira::parse_memory_method("adafactor"), fira::ParameterError);
}
