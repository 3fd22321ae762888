#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "semcorr/tensor.hpp"

namespace semcorr {

// A value on the reverse-mode tape together with its accumulated gradient.
// `grad` stays null until a backward pass reaches the record.
template <class T>
struct GradRecord {
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<GradRecord>> parents;
  // Receives d(loss)/d(value) and accumulates into the parents' grads.
  std::function<void(const BasicTensor<T>&)> backward_fn;

  void accumulate(const BasicTensor<T>& g) {
    if (g.shape() != value.shape()) {
      throw ShapeError(std::string("gradient shape ") + shape_string(g.shape()) +
                       " does not match value shape " + shape_string(value.shape()) +
                       " at op " + op);
    }
    if (grad.empty()) {
      grad = g;
      return;
    }
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
  }

  // Allocates a zero gradient so backward closures can add in place.
  BasicTensor<T>& grad_buffer() {
    if (grad.empty()) grad = BasicTensor<T>(value.shape());
    return grad;
  }
};

// Shared handle to a GradRecord. Copies alias the same record.
template <class T>
class BasicVar {
 public:
  using Record = GradRecord<T>;

  BasicVar() = default;
  explicit BasicVar(std::shared_ptr<Record> r) : rec_(std::move(r)) {}

  static BasicVar constant(BasicTensor<T> v) { return make_leaf(std::move(v), false); }
  static BasicVar parameter(BasicTensor<T> v) { return make_leaf(std::move(v), true); }

  bool defined() const { return rec_ != nullptr; }
  const BasicTensor<T>& value() const { return rec_->value; }
  BasicTensor<T>& mutable_value() { return rec_->value; }
  const BasicTensor<T>& grad() const { return rec_->grad; }
  bool requires_grad() const { return rec_->requires_grad; }
  const char* op() const { return rec_->op; }
  const Shape& shape() const { return rec_->value.shape(); }
  const std::shared_ptr<Record>& record() const { return rec_; }

  void zero_grad() { rec_->grad = BasicTensor<T>(); }

 private:
  static BasicVar make_leaf(BasicTensor<T> v, bool requires_grad) {
    auto r = std::make_shared<Record>();
    r->value = std::move(v);
    r->requires_grad = requires_grad;
    return BasicVar(std::move(r));
  }

  std::shared_ptr<Record> rec_;
};

using Var = BasicVar<float>;

// Builds an op result. The backward closure is only kept when some input
// needs a gradient, so inference builds no tape.
template <class T, class Fn>
BasicVar<T> make_op(const char* name, BasicTensor<T> value,
                    std::vector<BasicVar<T>> inputs, Fn backward) {
  auto r = std::make_shared<GradRecord<T>>();
  r->value = std::move(value);
  r->op = name;
  for (const auto& in : inputs) r->requires_grad = r->requires_grad || in.requires_grad();
  if (r->requires_grad) {
    r->parents.reserve(inputs.size());
    for (const auto& in : inputs) r->parents.push_back(in.record());
    r->backward_fn = std::move(backward);
  }
  return BasicVar<T>(std::move(r));
}

// Records reachable from `root`, parents before children.
template <class T>
std::vector<GradRecord<T>*> topological_order(const BasicVar<T>& root) {
  std::vector<GradRecord<T>*> order;
  std::unordered_set<GradRecord<T>*> seen;
  std::vector<std::pair<GradRecord<T>*, std::size_t>> stack;
  stack.emplace_back(root.record().get(), 0);
  seen.insert(root.record().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      GradRecord<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

// Reverse-mode pass from a scalar root. Gradients accumulate into every
// participating record that requires them.
template <class T>
void backward(const BasicVar<T>& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw ShapeError("backward requires a scalar root, got " +
                     (root.defined() ? shape_string(root.shape()) : std::string("null")));
  }
  if (!root.requires_grad()) return;
  auto order = topological_order(root);
  root.record()->accumulate(BasicTensor<T>(root.shape(), T{1}));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    GradRecord<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(node->grad);
  }
}

}  // namespace semcorr
