#include "frforge/numeric/tensor.hpp"

#include <cmath>
#include <cstring>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"

namespace frforge::numeric {
namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 2) throw ContractError("tensor shape must have 1 or 2 dimensions");
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

Tensor& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  const auto n = element_count(shape);
  auto [it, inserted] = tensors_.try_emplace(name, Tensor{std::move(shape), std::vector<float>(n, 0.0f)});
  if (!inserted) throw ContractError("duplicate parameter name '" + name + "'");
  return it->second;
}

Tensor& ParamStore::add_normal(const std::string& name, std::vector<std::size_t> shape, double stddev) {
  auto& t = add(name, std::move(shape));
  Rng rng(derive_seed(derive_seed(seed_, name), init_counter_++));
  for (auto& v : t.values) v = static_cast<float>(rng.normal(0.0, stddev));
  return t;
}

Tensor& ParamStore::add_uniform(const std::string& name, std::vector<std::size_t> shape, double limit) {
  auto& t = add(name, std::move(shape));
  Rng rng(derive_seed(derive_seed(seed_, name), init_counter_++));
  for (auto& v : t.values) v = static_cast<float>(rng.uniform(-limit, limit));
  return t;
}

Tensor& ParamStore::add_constant(const std::string& name, std::vector<std::size_t> shape, float value) {
  auto& t = add(name, std::move(shape));
  std::fill(t.values.begin(), t.values.end(), value);
  return t;
}

void ParamStore::set(const std::string& name, Tensor tensor) {
  if (element_count(tensor.shape) != tensor.values.size()) {
    throw ContractError("tensor '" + name + "' has inconsistent shape");
  }
  tensors_[name] = std::move(tensor);
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

std::uint64_t ParamStore::digest() const {
  std::uint64_t h = fnv1a64("params");
  for (const auto& [name, t] : tensors_) {
    h = fnv1a64(name, h);
    for (auto d : t.shape) h = fnv1a64(std::to_string(d) + ",", h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t.values.data()),
                                 t.values.size() * sizeof(float)),
                h);
  }
  return h;
}

bool ParamStore::all_finite() const {
  for (const auto& [_, t] : tensors_)
    for (float v : t.values)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace frforge::numeric
