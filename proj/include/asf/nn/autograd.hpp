#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "asf/nn/tensor.hpp"

namespace asf::nn {

struct Node;
using Var = std::shared_ptr<Node>;

// A value in the computation graph. Interior nodes own a closure that maps
// the node's gradient onto its parents' gradients.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(const Tensor& grad_out)> backward_fn;

  // Gradient buffer, zero-initialised on first use.
  Tensor& grad_buffer();
  void zero_grad() { grad = Tensor(); }
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Creates an op result. Records parents and the backward closure only when
// gradient recording is enabled and some parent requires a gradient.
Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(const Tensor& grad_out)> backward_fn);

// Reverse-mode sweep from a scalar root (seeded with 1) or from an explicit
// output gradient.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

bool grad_enabled();

// Disables graph recording for its lifetime (inference, pseudo-labels).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace asf::nn
