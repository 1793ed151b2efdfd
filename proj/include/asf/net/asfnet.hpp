#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asf/datastore/datastore.hpp"
#include "asf/net/flow.hpp"
#include "asf/nn/ops.hpp"
#include "asf/nn/params.hpp"

namespace asf::net {

struct ModelConfig {
  int channels = 64;
  int frames = 5;  // temporal window length L, odd
  int extractor_blocks = 2;
  int fusion_blocks = 8;
  int attention_reduction = 16;
  int shift_channels = -1;  // a; negative selects channels / 8
  int shift_distance = 1;   // n
  int kernel = 3;           // deformable kernel size
  std::array<int, 3> dilations{1, 2, 4};
  bool use_flow = true;
  bool use_dilation = true;  // false runs every offset branch at dilation 1
  bool use_shift = true;     // temporal shift plus its adaptive gate
  std::string flow = "block_matching";
  std::uint64_t seed = 0;

  void validate() const;
  int resolved_shift() const { return shift_channels < 0 ? channels / 8 : shift_channels; }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Ablation variants: a = deformable only, b = + flow, c = + dilated offsets,
// d = + shift (the full model).
ModelConfig ablation_variant(ModelConfig base, char variant);

struct ShiftConfig {
  int a = 0;  // channels exchanged at each end
  int n = 1;  // stack distance; negative n applies the inverse exchange
};

// out_i[0:a] = in_{i-n}[0:a], out_i[c-a:c] = in_{i+n}[c-a:c], middle channels
// copied. Indices outside the stack replicate the edge frame.
std::vector<nn::Var> temporal_shift(std::span<const nn::Var> stack, ShiftConfig config);

class AsfNet {
 public:
  explicit AsfNet(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  const FlowEstimator& flow_estimator() const { return *flow_; }
  void set_flow_estimator(std::shared_ptr<const FlowEstimator> flow);

  nn::Var extract(const nn::Var& frame);
  std::vector<nn::Var> extract_features(std::span<const nn::Var> frames);
  // flow maps target positions into the neighbor (see FlowEstimator).
  nn::Var align_neighbor(const nn::Var& target, const nn::Var& neighbor, const nn::Var& flow);
  nn::Var adaptive_gate(const nn::Var& shifted);
  nn::Var fuse(std::span<const nn::Var> stack);
  nn::Var reconstruct(const nn::Var& fused, const nn::Var& center);

  // Restores every frame of `frames` using windows of length L centred on it
  // (edge frames replicated). Records a graph when gradients are enabled.
  std::vector<nn::Var> forward(std::span<const nn::Var> frames);
  std::vector<nn::Var> forward(const data::VideoClip& clip);

  // Inference without graph recording; role restored.
  data::VideoClip restore(const data::VideoClip& clip);

  data::Checkpoint to_checkpoint() const;
  // Checks the stored model config and every parameter shape.
  void load(const data::Checkpoint& checkpoint);

 private:
  nn::Var conv(const std::string& name, const nn::Var& x, nn::Conv2dOptions options = {});
  void add_conv(const std::string& name, int out, int in, int k, double gain, Rng& rng);

  ModelConfig config_;
  nn::ParamStore params_;
  std::shared_ptr<const FlowEstimator> flow_;
};

}  // namespace asf::net
