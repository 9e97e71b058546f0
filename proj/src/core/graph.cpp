#include "iact/core/graph.hpp"

#include "iact/core/hash.hpp"

namespace iact {

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node& n = nodes_.emplace_back();
  n.own = std::move(value);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::parameter(Parameter<T>& param) {
  if (auto it = bound_.find(&param); it != bound_.end()) return Var<T>(this, it->second);
  Node& n = nodes_.emplace_back();
  n.external = &param.value;
  n.param = &param;
  n.needs_grad = options_.record && param.trainable;
  bound_.emplace(&param, nodes_.size() - 1);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& v : inputs) {
    if (v.graph() != this) throw UsageError("op inputs belong to a different graph");
    needs = needs || nodes_[v.id()].needs_grad;
  }
  Node& n = nodes_.emplace_back();
  n.own = std::move(value);
  n.needs_grad = needs && options_.record;
  if (n.needs_grad) n.backward = std::move(backward);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& v : inputs) {
    if (v.graph() != this) throw UsageError("op inputs belong to a different graph");
    needs = needs || nodes_[v.id()].needs_grad;
  }
  Node& n = nodes_.emplace_back();
  n.own = std::move(value);
  n.needs_grad = needs && options_.record;
  if (n.needs_grad) n.backward = std::move(backward);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
const Tensor<T>& Graph<T>::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.own;
}

template <typename T>
T* Graph<T>::grad_ptr(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad.data();
}

template <typename T>
void Graph<T>::backward(const Var<T>& loss) {
  if (!loss.attached()) throw UsageError("backward() on a tensor not attached to a computation record");
  if (loss.graph() != this) throw UsageError("backward() on a tensor from another computation record");
  if (!options_.record) throw UsageError("backward() on a graph that does not record");
  if (value(loss.id()).size() != 1) {
    throw UsageError("backward() needs a scalar loss, got " + shape_string(value(loss.id()).shape()));
  }
  if (T* g = grad_ptr(loss.id())) *g += T(1);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr && n.param->trainable) {
      Tensor<T>& slot = n.param->grad;
      if (slot.empty()) slot = Tensor<T>(n.param->value.shape());
      for (std::size_t k = 0; k < slot.size(); ++k) slot[k] += n.grad[k];
    }
  }
}

template <typename T>
void Graph<T>::note_kinks(std::uint64_t pattern) {
  kinks_ = fnv1a64_word(pattern, kinks_ == 0 ? kFnvOffset : kinks_);
}

template class Graph<float>;
template class Graph<double>;

}  // namespace iact
