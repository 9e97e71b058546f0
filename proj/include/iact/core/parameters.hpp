#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "iact/core/tensor.hpp"

namespace iact {

/// A named model weight. Trainable parameters own a gradient slot of the same
/// shape; frozen ones have none.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
};

/// Hierarchically named parameters ("dec.arm1.layer0.ffn.w1"). Iteration order
/// is lexicographic. References handed out stay valid for the store's
/// lifetime, including across moves.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  /// Throws UsageError on a duplicate name.
  Parameter<T>& add(const std::string& name, Tensor<T> init, bool trainable = true);

  Parameter<T>& at(const std::string& name);
  const Parameter<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  std::size_t size() const noexcept { return entries_.size(); }
  /// Total scalar count over all parameters.
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  void zero_grad();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Parameter<T>> entries_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace iact
