#include "fira/memory.hpp"

#include <algorithm>

#include "fira/error.hpp"

namespace fira {

void ArchSpec::validate() const {
  if (hidden == 0 || intermediate == 0 || heads == 0 || layers == 0 || vocab == 0 ||
      max_seq == 0) {
    throw ParameterError("ArchSpec: all dimensions must be positive");
  }
  if (hidden % heads != 0) throw ParameterError("ArchSpec: hidden must be divisible by heads");
}

std::optional<ArchSpec> builtin_arch(const std::string& name) {
  if (name == "llama-60m") return ArchSpec{name, 512, 1376, 8, 8};
  if (name == "llama-130m") return ArchSpec{name, 768, 2048, 12, 12};
  if (name == "llama-350m") return ArchSpec{name, 1024, 2736, 16, 24};
  if (name == "llama-1b") return ArchSpec{name, 2048, 5461, 32, 24};
  if (name == "llama-7b") return ArchSpec{name, 4096, 11008, 32, 32};
  return std::nullopt;
}

std::vector<std::string> builtin_arch_names() {
  return {"llama-60m", "llama-130m", "llama-350m", "llama-1b", "llama-7b"};
}

std::uint64_t ShapeInventory::parameter_count() const {
  std::uint64_t total = 0;
  for (const auto& m : matrices) total += static_cast<std::uint64_t>(m.rows) * m.cols;
  for (std::size_t v : vectors) total += v;
  return total;
}

std::uint64_t ShapeInventory::block_parameter_count() const {
  std::uint64_t total = 0;
  for (const auto& m : matrices) {
    if (m.role == MatrixRole::Attention || m.role == MatrixRole::Mlp) {
      total += static_cast<std::uint64_t>(m.rows) * m.cols;
    }
  }
  // The final norm vector sits outside the blocks.
  for (std::size_t i = 0; i + 1 < vectors.size(); ++i) total += vectors[i];
  return total;
}

ShapeInventory weight_matrix_shapes(const ArchSpec& arch) {
  arch.validate();
  ShapeInventory inv;
  const std::size_t h = arch.hidden;
  const std::size_t f = arch.intermediate;
  inv.matrices.push_back({"embed_tokens", arch.vocab, h, MatrixRole::Embedding, 0});
  for (std::size_t l = 0; l < arch.layers; ++l) {
    const std::string prefix = "layers." + std::to_string(l) + ".";
    for (const char* name : {"q_proj", "k_proj", "v_proj", "o_proj"}) {
      inv.matrices.push_back({prefix + name, h, h, MatrixRole::Attention, l});
    }
    inv.matrices.push_back({prefix + "gate_proj", f, h, MatrixRole::Mlp, l});
    inv.matrices.push_back({prefix + "up_proj", f, h, MatrixRole::Mlp, l});
    inv.matrices.push_back({prefix + "down_proj", h, f, MatrixRole::Mlp, l});
    inv.vectors.push_back(h);  // input_layernorm
    inv.vectors.push_back(h);  // post_attention_layernorm
  }
  inv.vectors.push_back(h);  // final norm
  inv.matrices.push_back({"lm_head", arch.vocab, h, MatrixRole::OutputHead, 0});
  return inv;
}

std::string to_string(MemoryMethod method) {
  switch (method) {
    case MemoryMethod::FullRank: return "full";
    case MemoryMethod::Fira: return "fira";
    case MemoryMethod::Galore: return "galore";
    case MemoryMethod::Lora: return "lora";
  }
  return "?";
}

MemoryMethod parse_memory_method(const std::string& text) {
  if (text == "full") return MemoryMethod::FullRank;
  if (text == "fira") return MemoryMethod::Fira;
  if (text == "galore") return MemoryMethod::Galore;
  if (text == "lora") return MemoryMethod::Lora;
  throw ParameterError("unknown method '" + text + "' (full|fira|galore|lora)");
}

ElementCounts matrix_element_counts(std::size_t rows, std::size_t cols, MemoryMethod method,
                                    std::size_t rank) {
  const std::uint64_t m = std::min(rows, cols);
  const std::uint64_t n = std::max(rows, cols);
  const std::uint64_t r = rank;
  if (method != MemoryMethod::FullRank && (r < 1 || r > m)) {
    throw ParameterError("rank " + std::to_string(r) + " outside [1, " + std::to_string(m) +
                         "] for a " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " matrix");
  }
  switch (method) {
    case MemoryMethod::FullRank: return {m * n, 2 * m * n};
    case MemoryMethod::Fira: return {m * n, m * r + 2 * n * r + 1};
    case MemoryMethod::Galore: return {m * n, m * r + 2 * n * r};
    case MemoryMethod::Lora: return {m * n + m * r + n * r, 2 * m * r + 2 * n * r};
  }
  return {};
}

MemoryEstimate estimate(const ArchSpec& arch, MemoryMethod method, std::size_t rank) {
  const ShapeInventory inv = weight_matrix_shapes(arch);
  ElementCounts total;
  for (const WeightShape& w : inv.matrices) {
    const bool in_block = w.role == MatrixRole::Attention || w.role == MatrixRole::Mlp;
    const ElementCounts c =
        matrix_element_counts(w.rows, w.cols, in_block ? method : MemoryMethod::FullRank, rank);
    total.weights += c.weights;
    total.states += c.states;
  }
  for (std::size_t v : inv.vectors) {
    total.weights += v;
    total.states += 2 * static_cast<std::uint64_t>(v);
  }
  MemoryEstimate e;
  e.weight_bytes = total.weights * kBytesPerElement;
  e.optimizer_state_bytes = total.states * kBytesPerElement;
  e.total_bytes = e.weight_bytes + e.optimizer_state_bytes;
  e.method = method;
  e.rank = method == MemoryMethod::FullRank ? 0 : rank;
  return e;
}

}  // namespace fira
