#include "iact/core/parameters.hpp"

#include "iact/core/error.hpp"

namespace iact {

template <typename T>
Parameter<T>& ParameterStore<T>::add(const std::string& name, Tensor<T> init, bool trainable) {
  if (entries_.count(name)) throw UsageError("duplicate parameter name: " + name);
  Parameter<T> p;
  p.grad = trainable ? Tensor<T>(init.shape()) : Tensor<T>();
  p.value = std::move(init);
  p.trainable = trainable;
  return entries_.emplace(name, std::move(p)).first->second;
}

template <typename T>
Parameter<T>& ParameterStore<T>::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

template <typename T>
const Parameter<T>& ParameterStore<T>::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) n += p.value.size();
  return n;
}

template <typename T>
std::vector<std::string> ParameterStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, p] : entries_) out.push_back(name);
  return out;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& [name, p] : entries_) {
    if (!p.grad.empty()) p.grad.fill(T(0));
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace iact
