#include "asf/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "asf/common/error.hpp"

namespace asf::nn {
namespace {

std::size_t product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw PreconditionError("negative tensor dimension in " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  if (data_.size() != product(shape_)) {
    throw ShapeMismatchError("tensor of shape " + nn::shape_string(shape_) + " given " +
                             std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::uninitialized(std::vector<int> shape) {
  Tensor t;
  t.data_.resize(product(shape));
  t.shape_ = std::move(shape);
  return t;
}

std::span<double> Tensor::channel(int c) {
  const std::size_t plane = numel() / static_cast<std::size_t>(shape_[0]);
  return {data_.data() + static_cast<std::size_t>(c) * plane, plane};
}

std::span<const double> Tensor::channel(int c) const {
  const std::size_t plane = numel() / static_cast<std::size_t>(shape_[0]);
  return {data_.data() + static_cast<std::size_t>(c) * plane, plane};
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const { return nn::shape_string(shape_); }

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "Tensor::operator+=");
  std::transform(data_.begin(), data_.end(), other.data_.begin(), data_.begin(), std::plus<>());
  return *this;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeMismatchError(std::string(what) + ": shapes " + a.shape_string() + " and " +
                             b.shape_string() + " differ");
  }
}

void require_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeMismatchError(std::string(what) + ": expected rank " + std::to_string(rank) +
                             ", got " + t.shape_string());
  }
}

Tensor identity_grid(int height, int width) {
  Tensor grid({2, height, width});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      grid.at(0, y, x) = x;
      grid.at(1, y, x) = y;
    }
  }
  return grid;
}

}  // namespace asf::nn
