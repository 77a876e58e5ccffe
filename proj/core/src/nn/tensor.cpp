#include "divrec/nn/tensor.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

#include "divrec/errors.hpp"

namespace divrec::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel_of(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " holds " +
                     std::to_string(numel_of(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) throw IndexError("dimension index out of range");
  return s[i];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() <= 1) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::values() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

std::span<const double> Tensor::grad() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return std::span<const double>(node_->grad_data(), node_->value.size());
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw ContractError("use of undefined tensor");
  node_->requires_grad = flag;
  if (flag && node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

namespace {

template <typename Parents>
std::shared_ptr<detail::Node> build_result(Shape shape, std::vector<double> values, const Parents& parents,
                    std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (const auto& p : parents) node->parents.push_back(p.node_ptr());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return node;
}

}  // namespace

Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<Tensor> parents,
                   std::function<void(detail::Node&)> backward_fn) {
  return Tensor(build_result(std::move(shape), std::move(values), parents,
                             std::move(backward_fn)));
}

Tensor make_result(Shape shape, std::vector<double> values,
                   const std::vector<Tensor>& parents,
                   std::function<void(detail::Node&)> backward_fn) {
  return Tensor(build_result(std::move(shape), std::move(values), parents,
                             std::move(backward_fn)));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  detail::Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_data()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace divrec::nn
