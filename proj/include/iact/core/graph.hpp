#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "iact/core/error.hpp"
#include "iact/core/parameters.hpp"
#include "iact/core/tensor.hpp"

namespace iact {

template <typename T>
class Graph;

/// Handle to a value recorded in a Graph. Cheap to copy; valid as long as the
/// graph is alive.
template <typename T>
class Var {
 public:
  Var() = default;

  bool attached() const noexcept { return graph_ != nullptr; }
  Graph<T>* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor<T>& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Graph<T>;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

struct GraphOptions {
  /// Keep backward closures and allow backward(). Off for pure inference.
  bool record = true;
  /// Fold the activation pattern of every kinked op (relu, abs, clamp) into a
  /// signature, so finite-difference probes can detect crossing a kink.
  bool track_kinks = false;
  /// Fault injection for verifying the gradient checker itself: the matmul
  /// backward rule for its right operand is scaled by 1.01.
  bool corrupt_backward = false;
};

/// Dynamic tape for reverse-mode differentiation. Nodes are appended in
/// evaluation order, which is already a topological order, so backward() is a
/// single reverse sweep. A graph lives for one forward/backward step.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  explicit Graph(GraphOptions options = {}) : options_(options) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  const GraphOptions& options() const noexcept { return options_; }
  bool recording() const noexcept { return options_.record; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var<T> constant(Tensor<T> value);
  /// Binds a parameter; repeated binds of the same parameter return the same
  /// node so that gradients accumulate in one place.
  Var<T> parameter(Parameter<T>& param);

  /// Appends an op result. `backward` may be empty for ops without inputs that
  /// need gradients; it is dropped entirely when no input needs one.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward);

  const Tensor<T>& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient accumulator of a node, allocated (zeroed) on first use; nullptr
  /// if the node does not need a gradient.
  T* grad_ptr(std::size_t id);

  /// Reverse sweep from a scalar loss, accumulating into parameter gradient
  /// slots. Throws UsageError for detached/foreign/non-scalar losses or when
  /// the graph does not record.
  void backward(const Var<T>& loss);

  void note_kinks(std::uint64_t pattern);
  std::uint64_t kink_signature() const noexcept { return kinks_; }

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
  };

  GraphOptions options_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> bound_;
  std::uint64_t kinks_ = 0;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  if (graph_ == nullptr) throw UsageError("value() on a detached Var");
  return graph_->value(id_);
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace iact
