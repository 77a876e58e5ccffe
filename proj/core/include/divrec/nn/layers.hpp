#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "divrec/nn/tensor.hpp"

namespace divrec::nn {

using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

void zero_grads(const ParamList& params);
void set_trainable(const ParamList& params, bool trainable);
// FNV-1a over the raw bytes of every value; used for freezing contracts.
std::uint64_t param_hash(const ParamList& params);
ParamList concat(ParamList a, const ParamList& b);
// Copies values from src into dst (names and shapes must line up).
void copy_values(const ParamList& src, const ParamList& dst);
std::size_t param_count(const ParamList& params);

enum class Activation { kIdentity, kRelu, kSigmoid, kTanh };
Tensor activate(const Tensor& x, Activation act);

struct LoraFactors {
  Tensor down;  // [in, rank]
  Tensor up;    // [rank, out]
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) const;
  // x·W + b + scaling·(x·A)·B
  Tensor forward(const Tensor& x, const LoraFactors* lora, double scaling) const;

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

// Three-layer perceptron σ3(W3 σ2(W2 σ1(W1 x + b1) + b2) + b3).
class Mlp3 {
 public:
  Mlp3() = default;
  Mlp3(std::size_t in, std::size_t hidden1, std::size_t hidden2, std::size_t out, Rng& rng,
       Activation a1 = Activation::kRelu, Activation a2 = Activation::kRelu,
       Activation a3 = Activation::kIdentity);

  Tensor forward(const Tensor& x) const;
  std::size_t in_features() const { return l1.in_features(); }
  std::size_t out_features() const { return l3.out_features(); }
  ParamList params(const std::string& prefix = "") const;

  Linear l1, l2, l3;
  Activation a1 = Activation::kRelu;
  Activation a2 = Activation::kRelu;
  Activation a3 = Activation::kIdentity;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);
  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor gain;
  Tensor bias;
};

// Low-rank additive updates for a fixed list of target matrices.
class LowRankAdapter {
 public:
  LowRankAdapter() = default;
  // `up` factors start at zero so the adapted model equals the base model.
  LowRankAdapter(std::size_t rank, double scaling,
                 const std::vector<std::pair<std::size_t, std::size_t>>& targets, Rng& rng);

  std::size_t rank() const { return rank_; }
  double scaling() const { return scaling_; }
  std::size_t size() const { return factors_.size(); }
  const LoraFactors* at(std::size_t i) const { return &factors_.at(i); }
  LoraFactors& mutable_at(std::size_t i) { return factors_.at(i); }
  ParamList params(const std::string& prefix = "adapter") const;

 private:
  std::size_t rank_ = 0;
  double scaling_ = 1.0;
  std::vector<LoraFactors> factors_;
};

// Pre-norm single-head self-attention block with a ReLU feed-forward.
class TransformerBlock {
 public:
  static constexpr std::size_t kAdapterSlots = 6;  // q, k, v, o, ff1, ff2

  TransformerBlock() = default;
  TransformerBlock(std::size_t width, std::size_t ff_width, bool causal, Rng& rng);

  // adapter may be null; slots [offset, offset + 6) are used when present.
  Tensor forward(const Tensor& x, const LowRankAdapter* adapter = nullptr,
                 std::size_t adapter_offset = 0) const;
  void collect(ParamList& out, const std::string& prefix) const;
  std::vector<std::pair<std::size_t, std::size_t>> adapter_targets() const;

  LayerNorm ln1, ln2;
  Linear q, k, v, o, ff1, ff2;
  bool causal = false;
};

}  // namespace divrec::nn
