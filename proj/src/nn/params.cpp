#include "asf/nn/params.hpp"

#include <cmath>

#include "asf/common/error.hpp"

namespace asf::nn {

const Var& ParamStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw PreconditionError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, parameter(std::move(init)));
  return entries_.back().second;
}

const Var& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw PreconditionError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, var] : entries_) n += var->value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, var] : entries_) var->zero_grad();
}

void ParamStore::assign(const std::string& name, const Tensor& value) {
  const Var& var = get(name);
  if (!var->value.same_shape(value)) {
    throw ShapeMismatchError("parameter '" + name + "' has shape " + var->value.shape_string() +
                             ", got " + value.shape_string());
  }
  var->value = value;
}

Tensor uniform_init(std::vector<int> shape, int fan_in, double gain, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace asf::nn
