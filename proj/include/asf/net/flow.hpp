#pragma once

#include <memory>
#include <string>

#include "asf/common/error.hpp"
#include "asf/nn/tensor.hpp"

namespace asf::net {

// Flow convention: flow = estimate(a, b) satisfies a(p) ~ b(p + flow(p)), so
// warp(features_of_b, flow) lines b up with a.
class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  virtual std::string name() const = 0;
  // a, b: 3 x H x W frames of equal shape. Returns 2 x H x W (dx, dy).
  virtual nn::Tensor estimate(const nn::Tensor& a, const nn::Tensor& b) const = 0;
};

class ZeroFlow final : public FlowEstimator {
 public:
  std::string name() const override { return "zero"; }
  nn::Tensor estimate(const nn::Tensor& a, const nn::Tensor& b) const override;
};

struct BlockMatchConfig {
  int levels = 3;         // pyramid levels including full resolution
  int search_radius = 3;  // exhaustive search at the coarsest level
  int refine_radius = 1;  // search around the upsampled estimate below it
  int patch_radius = 2;   // SAD window is (2r + 1)^2
};

// Coarse-to-fine integer block matching on BT.601 luminance. Candidates with
// equal SAD resolve to the smaller displacement, so flat regions and identical
// frames produce zero flow.
class BlockMatchFlow final : public FlowEstimator {
 public:
  explicit BlockMatchFlow(BlockMatchConfig config = {});
  std::string name() const override { return "block_matching"; }
  nn::Tensor estimate(const nn::Tensor& a, const nn::Tensor& b) const override;
  const BlockMatchConfig& config() const { return config_; }

 private:
  BlockMatchConfig config_;
};

// "zero" or "block_matching"; anything else is a ConfigError.
std::shared_ptr<const FlowEstimator> make_flow_estimator(const std::string& name);

// 1 x H x W luminance of a 3 x H x W frame.
nn::Tensor luminance(const nn::Tensor& rgb);

}  // namespace asf::net
