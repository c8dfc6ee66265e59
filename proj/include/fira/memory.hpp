#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fira {

// LLaMA-style decoder shape.
struct ArchSpec {
  std::string name;
  std::size_t hidden = 0;
  std::size_t intermediate = 0;
  std::size_t heads = 0;
  std::size_t layers = 0;
  std::size_t vocab = 32000;
  std::size_t max_seq = 256;

  // Throws ParameterError unless all fields are positive and hidden is a
  // multiple of heads.
  void validate() const;
};

// llama-60m, llama-130m, llama-350m, llama-1b, llama-7b.
std::optional<ArchSpec> builtin_arch(const std::string& name);
std::vector<std::string> builtin_arch_names();

enum class MatrixRole { Attention, Mlp, Embedding, OutputHead };

struct WeightShape {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  MatrixRole role;
  std::size_t layer;  // 0 for embedding / head
};

struct ShapeInventory {
  std::vector<WeightShape> matrices;
  // RMSNorm gains: two per block plus the final norm.
  std::vector<std::size_t> vectors;

  std::uint64_t parameter_count() const;
  // Parameters inside transformer blocks (matrices and their norms).
  std::uint64_t block_parameter_count() const;
};

// Per block: q, k, v, o (hidden x hidden), gate and up (intermediate x
// hidden), down (hidden x intermediate); plus embedding and untied output
// head (vocab x hidden).
ShapeInventory weight_matrix_shapes(const ArchSpec& arch);

enum class MemoryMethod { FullRank, Fira, Galore, Lora };

std::string to_string(MemoryMethod method);
MemoryMethod parse_memory_method(const std::string& text);

struct ElementCounts {
  std::uint64_t weights = 0;
  std::uint64_t states = 0;
};

// Element counts for one m x n matrix, oriented so that m <= n:
//   full-rank  weights mn,            states 2mn
//   fira       weights mn,            states mr + 2nr + 1
//   galore     weights mn,            states mr + 2nr
//   lora       weights mn + mr + nr,  states 2mr + 2nr
// Throws ParameterError if r is outside [1, min(m, n)] for the low-rank
// methods.
ElementCounts matrix_element_counts(std::size_t rows, std::size_t cols, MemoryMethod method,
                                    std::size_t rank);

inline constexpr std::uint64_t kBytesPerElement = 2;  // BF16
inline constexpr double kBytesPerGb = 1024.0 * 1024.0 * 1024.0;

struct MemoryEstimate {
  std::uint64_t weight_bytes = 0;
  std::uint64_t optimizer_state_bytes = 0;
  std::uint64_t total_bytes = 0;
  MemoryMethod method = MemoryMethod::FullRank;
  std::size_t rank = 0;

  double total_gb() const { return static_cast<double>(total_bytes) / kBytesPerGb; }
};

// Block matrices use the method's formula; embedding, output head and norm
// vectors are always counted as full-rank Adam parameters.
MemoryEstimate estimate(const ArchSpec& arch, MemoryMethod method, std::size_t rank);

}  // namespace fira
