#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace divrec::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily for intermediates
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  double* grad_data() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad.data();
  }
};

}  // namespace detail

// Dense row-major tensor of doubles with an optional reverse-mode tape.
// Copies share storage; use detach() for an independent value copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;
  // 2-D view: rows is the product of all leading dimensions.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i) const { return values()[i]; }

  // Zero-filled when no gradient has been accumulated.
  std::span<const double> grad() const;
  bool requires_grad() const;
  void set_requires_grad(bool flag);
  void zero_grad();

  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape shape, std::vector<double> values,
                            std::initializer_list<Tensor> parents,
                            std::function<void(detail::Node&)> backward_fn);
  friend Tensor make_result(Shape shape, std::vector<double> values,
                            const std::vector<Tensor>& parents,
                            std::function<void(detail::Node&)> backward_fn);
};

// Builds an op output. The tape entry is recorded only when gradients are
// enabled and some parent requires them.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<Tensor> parents,
                   std::function<void(detail::Node&)> backward_fn);
Tensor make_result(Shape shape, std::vector<double> values,
                   const std::vector<Tensor>& parents,
                   std::function<void(detail::Node&)> backward_fn);

// Accumulates d(loss)/d(leaf) into every reachable leaf. Loss must be scalar.
void backward(const Tensor& loss);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace divrec::nn
