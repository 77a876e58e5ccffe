#include "divrec/nn/layers.hpp"

#include <cmath>
#include <cstring>

#include "divrec/errors.hpp"
#include "divrec/nn/ops.hpp"

namespace divrec::nn {

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) {
    auto t = p.tensor;
    t.zero_grad();
  }
}

void set_trainable(const ParamList& params, bool trainable) {
  for (const auto& p : params) {
    auto t = p.tensor;
    t.set_requires_grad(trainable);
  }
}

std::uint64_t param_hash(const ParamList& params) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params) {
    mix(p.name.data(), p.name.size());
    auto v = p.tensor.values();
    mix(v.data(), v.size() * sizeof(double));
  }
  return h;
}

ParamList concat(ParamList a, const ParamList& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void copy_values(const ParamList& src, const ParamList& dst) {
  if (src.size() != dst.size()) throw ShapeError("copy_values: parameter count mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].tensor.numel() != dst[i].tensor.numel()) {
      throw ShapeError("copy_values: size mismatch for " + src[i].name);
    }
    auto d = dst[i].tensor;
    auto s = src[i].tensor.values();
    std::copy(s.begin(), s.end(), d.mutable_values().begin());
  }
}

std::size_t param_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return relu(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kTanh:
      return tanh(x);
  }
  return x;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(init_uniform({in, out}, in, rng)), bias(init_uniform({out}, in, rng)) {}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight, bias); }

Tensor Linear::forward(const Tensor& x, const LoraFactors* lora, double scaling) const {
  Tensor y = linear(x, weight, bias);
  if (lora == nullptr) return y;
  return add(y, scale(matmul(matmul(x, lora->down), lora->up), scaling));
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Mlp3::Mlp3(std::size_t in, std::size_t hidden1, std::size_t hidden2, std::size_t out, Rng& rng,
           Activation act1, Activation act2, Activation act3)
    : l1(in, hidden1, rng), l2(hidden1, hidden2, rng), l3(hidden2, out, rng), a1(act1), a2(act2),
      a3(act3) {}

Tensor Mlp3::forward(const Tensor& x) const {
  if (x.cols() != l1.in_features()) {
    throw ShapeError("mlp input dimension " + std::to_string(x.cols()) +
                     " does not match first-layer input dimension " +
                     std::to_string(l1.in_features()));
  }
  Tensor in = x.ndim() == 2 ? x : reshape(x, {x.rows(), x.cols()});
  Tensor h = activate(l1.forward(in), a1);
  h = activate(l2.forward(h), a2);
  return activate(l3.forward(h), a3);
}

ParamList Mlp3::params(const std::string& prefix) const {
  ParamList out;
  const std::string p = prefix.empty() ? "" : prefix + ".";
  l1.collect(out, p + "l1");
  l2.collect(out, p + "l2");
  l3.collect(out, p + "l3");
  return out;
}

LayerNorm::LayerNorm(std::size_t dim)
    : gain(Shape{dim}, std::vector<double>(dim, 1.0), true),
      bias(Shape{dim}, std::vector<double>(dim, 0.0), true) {}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, gain, bias); }

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

LowRankAdapter::LowRankAdapter(std::size_t rank, double scaling,
                               const std::vector<std::pair<std::size_t, std::size_t>>& targets,
                               Rng& rng)
    : rank_(rank), scaling_(scaling) {
  for (const auto& [in, out] : targets) {
    if (rank == 0 || rank > std::min(in, out)) {
      throw ContractError("adapter rank " + std::to_string(rank) + " invalid for " +
                          std::to_string(in) + "x" + std::to_string(out) + " target");
    }
    factors_.push_back({init_uniform({in, rank}, in, rng), Tensor::zeros({rank, out}, true)});
  }
}

ParamList LowRankAdapter::params(const std::string& prefix) const {
  ParamList out;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    out.push_back({prefix + "." + std::to_string(i) + ".down", factors_[i].down});
    out.push_back({prefix + "." + std::to_string(i) + ".up", factors_[i].up});
  }
  return out;
}

TransformerBlock::TransformerBlock(std::size_t width, std::size_t ff_width, bool is_causal, Rng& rng)
    : ln1(width),
      ln2(width),
      q(width, width, rng),
      k(width, width, rng),
      v(width, width, rng),
      o(width, width, rng),
      ff1(width, ff_width, rng),
      ff2(ff_width, width, rng),
      causal(is_causal) {}

Tensor TransformerBlock::forward(const Tensor& x, const LowRankAdapter* adapter,
                                 std::size_t offset) const {
  auto slot = [&](std::size_t i) -> const LoraFactors* {
    return adapter ? adapter->at(offset + i) : nullptr;
  };
  const double s = adapter ? adapter->scaling() : 0.0;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.out_features()));

  Tensor h = ln1.forward(x);
  Tensor qh = q.forward(h, slot(0), s);
  Tensor kh = k.forward(h, slot(1), s);
  Tensor vh = v.forward(h, slot(2), s);
  Tensor attn = softmax_rows(scale(matmul_bt(qh, kh), inv_sqrt), causal);
  Tensor x1 = add(x, o.forward(matmul(attn, vh), slot(3), s));

  Tensor h2 = ln2.forward(x1);
  Tensor f = ff2.forward(relu(ff1.forward(h2, slot(4), s)), slot(5), s);
  return add(x1, f);
}

void TransformerBlock::collect(ParamList& out, const std::string& prefix) const {
  ln1.collect(out, prefix + ".ln1");
  ln2.collect(out, prefix + ".ln2");
  q.collect(out, prefix + ".q");
  k.collect(out, prefix + ".k");
  v.collect(out, prefix + ".v");
  o.collect(out, prefix + ".o");
  ff1.collect(out, prefix + ".ff1");
  ff2.collect(out, prefix + ".ff2");
}

std::vector<std::pair<std::size_t, std::size_t>> TransformerBlock::adapter_targets() const {
  return {{q.in_features(), q.out_features()},   {k.in_features(), k.out_features()},
          {v.in_features(), v.out_features()},   {o.in_features(), o.out_features()},
          {ff1.in_features(), ff1.out_features()}, {ff2.in_features(), ff2.out_features()}};
}

}  // namespace divrec::nn
