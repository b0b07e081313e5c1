#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "afgn/errors.hpp"

namespace afgn {

inline std::string shape_string(std::span<const size_t> shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

namespace detail {

template <typename T>
struct TensorData {
  std::vector<size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  bool consumed = false;  // set once backward() ran from this node

  // Reverse-mode record: parents feed this node; backprop distributes
  // this node's gradient to them. Cleared as backward() retires records.
  std::vector<std::shared_ptr<TensorData>> parents;
  std::function<void(const TensorData&)> backprop;

  size_t numel() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

inline int& no_grad_depth() {
  thread_local int depth = 0;
  return depth;
}

}  // namespace detail

inline bool grad_enabled() { return detail::no_grad_depth() == 0; }

// Scoped switch that stops ops from recording the graph (inference paths).
class NoGradGuard {
 public:
  NoGradGuard() { ++detail::no_grad_depth(); }
  ~NoGradGuard() { --detail::no_grad_depth(); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Dense n-dimensional value grid with an optional gradient slot. Copies are
// shallow (shared storage); ops treat inputs as immutable.
template <typename T = float>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(std::vector<size_t> shape, T fill = T(0))
      : d_(std::make_shared<detail::TensorData<T>>()) {
    size_t n = 1;
    for (size_t e : shape) {
      if (e == 0) throw ShapeError("tensor extents must be positive, got " +
                                   shape_string(shape));
      n *= e;
    }
    d_->shape = std::move(shape);
    d_->value.assign(n, fill);
  }

  static Tensor zeros(std::vector<size_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor full(std::vector<size_t> shape, T v) {
    return Tensor(std::move(shape), v);
  }

  static Tensor scalar(T v) { return Tensor({1}, v); }

  static Tensor from(std::vector<size_t> shape, std::vector<T> data) {
    Tensor t;
    size_t n = 1;
    for (size_t e : shape) n *= e;
    if (n != data.size())
      throw ShapeError("data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string(shape));
    t.d_ = std::make_shared<detail::TensorData<T>>();
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(data);
    return t;
  }

  bool defined() const { return d_ != nullptr; }
  const std::vector<size_t>& shape() const { return d_->shape; }
  size_t rank() const { return d_->shape.size(); }
  size_t numel() const { return d_->value.size(); }
  size_t extent(size_t dim) const { return d_->shape.at(dim); }

  std::span<T> values() { return d_->value; }
  std::span<const T> values() const { return d_->value; }
  T* data() { return d_->value.data(); }
  const T* data() const { return d_->value.data(); }

  T item() const {
    if (numel() != 1)
      throw ShapeError("item() requires a scalar, got " +
                       shape_string(d_->shape));
    return d_->value[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool flag = true) {
    d_->requires_grad = flag;
    return *this;
  }

  bool has_grad() const { return d_->grad.size() == d_->value.size(); }
  std::span<const T> grad() const {
    if (!has_grad())
      throw ValueError("gradient not populated; call backward() first");
    return d_->grad;
  }
  std::span<T> grad_mut() {
    d_->ensure_grad();
    return d_->grad;
  }
  void zero_grad() {
    if (!d_->grad.empty()) d_->grad.assign(d_->value.size(), T(0));
  }

  // Value copy with no graph attachment.
  Tensor detached() const {
    Tensor t;
    t.d_ = std::make_shared<detail::TensorData<T>>();
    t.d_->shape = d_->shape;
    t.d_->value = d_->value;
    return t;
  }

  bool all_finite() const {
    for (T v : d_->value)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Reverse sweep from this scalar root. Builds the topologically ordered
  // record list, then retires each record exactly once in reverse order,
  // accumulating into every requires_grad leaf. A second call on the same
  // root is rejected; a fresh forward pass starts a fresh graph.
  void backward() {
    if (numel() != 1)
      throw ValueError("backward: root must be a scalar, got " +
                       shape_string(d_->shape));
    if (d_->consumed)
      throw ValueError("backward: graph already consumed; rerun the forward "
                       "pass before calling backward again");

    using Data = detail::TensorData<T>;
    std::vector<Data*> topo;
    std::unordered_set<Data*> seen;
    // Iterative post-order DFS over parents.
    std::vector<std::pair<Data*, size_t>> stack;
    stack.emplace_back(d_.get(), 0);
    seen.insert(d_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Data* p = node->parents[next++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        topo.push_back(node);
        stack.pop_back();
      }
    }

    d_->ensure_grad();
    d_->grad[0] = T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      Data* node = *it;
      if (node->backprop) {
        node->ensure_grad();
        node->backprop(*node);
      }
      // Retire the record; keeps the sweep single-visit and frees the graph.
      node->backprop = nullptr;
      node->parents.clear();
    }
    d_->consumed = true;
  }

  std::shared_ptr<detail::TensorData<T>> impl() const { return d_; }

  // Used by op implementations to assemble graph nodes.
  static Tensor make_node(std::vector<size_t> shape, std::vector<T> value,
                          std::vector<Tensor> parents,
                          std::function<void(const detail::TensorData<T>&)> fn) {
    Tensor out = from(std::move(shape), std::move(value));
    bool track = grad_enabled();
    bool any = false;
    if (track) {
      for (const auto& p : parents)
        if (p.d_->requires_grad) {
          any = true;
          break;
        }
    }
    if (track && any) {
      out.d_->requires_grad = true;
      out.d_->parents.reserve(parents.size());
      for (auto& p : parents) out.d_->parents.push_back(p.d_);
      out.d_->backprop = std::move(fn);
    }
    return out;
  }

 private:
  std::shared_ptr<detail::TensorData<T>> d_;
};

}  // namespace afgn
