#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "asf/common/rng.hpp"
#include "asf/nn/autograd.hpp"

namespace asf::nn {

// Named learnable tensors in registration order. Names are dotted module
// paths ("fusion.block3.conv1.weight") and double as checkpoint keys.
class ParamStore {
 public:
  using Entry = std::pair<std::string, Var>;

  const Var& add(const std::string& name, Tensor init);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Replaces the value of `name`, checking the shape.
  void assign(const std::string& name, const Tensor& value);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// U(-bound, bound) with bound = gain * sqrt(3 / fan_in).
Tensor uniform_init(std::vector<int> shape, int fan_in, double gain, Rng& rng);

}  // namespace asf::nn
