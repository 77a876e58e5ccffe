#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "divrec/nn/tensor.hpp"

// Differentiable operations. Tensors are treated as 2-D (rows x cols) unless
// noted; shape mismatches raise ShapeError naming both shapes.
namespace divrec::nn {

Tensor matmul(const Tensor& a, const Tensor& b);            // [m,k]·[k,n]
Tensor matmul_bt(const Tensor& a, const Tensor& b);         // [m,k]·[n,k]ᵀ
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);  // x·W + b

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_rowwise(const Tensor& a, const Tensor& row);     // broadcast [n] over rows
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mean_rows(const Tensor& a);                          // [m,n] -> [1,n]

Tensor softmax_rows(const Tensor& a, bool causal = false);
Tensor log_softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor select_cols(const Tensor& a, std::span<const std::size_t> cols);
Tensor reshape(const Tensor& a, Shape shape);

// Mean negative log-likelihood of targets under row-wise softmax(logits).
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross-entropy with p clamped to [1e-7, 1-1e-7].
Tensor bce(const Tensor& p, std::span<const double> labels);

}  // namespace divrec::nn
