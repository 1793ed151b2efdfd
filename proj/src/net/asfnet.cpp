#include "asf/net/asfnet.hpp"

#include <algorithm>
#include <cmath>

namespace asf::net {
namespace {

using nlohmann::json;
using nn::Tensor;
using nn::Var;

std::string block(const std::string& prefix, int i) { return prefix + ".block" + std::to_string(i); }

template <typename T>
void read_into(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("model config field '") + key + "' has the wrong type");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (channels < 1) throw ConfigError("model channels must be >= 1");
  if (frames < 1 || frames % 2 == 0) throw ConfigError("model frames (L) must be odd and >= 1");
  if (extractor_blocks < 0 || fusion_blocks < 0) throw ConfigError("block counts must be >= 0");
  if (attention_reduction < 1) throw ConfigError("attention_reduction must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd");
  const int a = resolved_shift();
  if (a > channels / 2) throw ConfigError("shift channels a must satisfy 0 <= a <= c/2");
  if (shift_distance == 0) throw ConfigError("shift distance n must be nonzero");
  for (int d : dilations) {
    if (d < 1) throw ConfigError("dilations must be >= 1");
  }
  if (flow != "zero" && flow != "block_matching") {
    throw ConfigError("unknown flow estimator '" + flow + "'");
  }
}

json to_json(const ModelConfig& c) {
  return {{"channels", c.channels},
          {"frames", c.frames},
          {"extractor_blocks", c.extractor_blocks},
          {"fusion_blocks", c.fusion_blocks},
          {"attention_reduction", c.attention_reduction},
          {"shift_channels", c.shift_channels},
          {"shift_distance", c.shift_distance},
          {"kernel", c.kernel},
          {"dilations", c.dilations},
          {"use_flow", c.use_flow},
          {"use_dilation", c.use_dilation},
          {"use_shift", c.use_shift},
          {"flow", c.flow},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  const json known = to_json(ModelConfig{});
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown model config field '" + key + "'");
  }
  ModelConfig c;
  read_into(j, "channels", c.channels);
  read_into(j, "frames", c.frames);
  read_into(j, "extractor_blocks", c.extractor_blocks);
  read_into(j, "fusion_blocks", c.fusion_blocks);
  read_into(j, "attention_reduction", c.attention_reduction);
  read_into(j, "shift_channels", c.shift_channels);
  read_into(j, "shift_distance", c.shift_distance);
  read_into(j, "kernel", c.kernel);
  read_into(j, "dilations", c.dilations);
  read_into(j, "use_flow", c.use_flow);
  read_into(j, "use_dilation", c.use_dilation);
  read_into(j, "use_shift", c.use_shift);
  read_into(j, "flow", c.flow);
  read_into(j, "seed", c.seed);
  c.validate();
  return c;
}

ModelConfig ablation_variant(ModelConfig base, char variant) {
  switch (variant) {
    case 'a':
      base.use_flow = false;
      base.use_dilation = false;
      base.use_shift = false;
      break;
    case 'b':
      base.use_flow = true;
      base.use_dilation = false;
      base.use_shift = false;
      break;
    case 'c':
      base.use_flow = true;
      base.use_dilation = true;
      base.use_shift = false;
      break;
    case 'd':
      base.use_flow = true;
      base.use_dilation = true;
      base.use_shift = true;
      break;
    default:
      throw ConfigError(std::string("unknown ablation variant '") + variant + "'");
  }
  return base;
}

std::vector<Var> temporal_shift(std::span<const Var> stack, ShiftConfig config) {
  if (stack.empty()) throw PreconditionError("temporal_shift needs a non-empty stack");
  const Tensor& first = stack.front()->value;
  nn::require_rank(first, 3, "temporal_shift");
  for (const Var& f : stack) nn::require_same_shape(first, f->value, "temporal_shift");
  const int c = first.dim(0);
  if (config.a < 0 || config.a > c / 2) {
    throw PreconditionError("temporal_shift: a = " + std::to_string(config.a) +
                            " outside [0, " + std::to_string(c / 2) + "]");
  }
  if (config.a == 0) return {stack.begin(), stack.end()};
  const int count = static_cast<int>(stack.size());
  auto at = [&](int i) { return stack[static_cast<std::size_t>(std::clamp(i, 0, count - 1))]; };
  std::vector<Var> out;
  out.reserve(stack.size());
  for (int i = 0; i < count; ++i) {
    const Var parts[] = {nn::slice_channels(at(i - config.n), 0, config.a),
                         nn::slice_channels(at(i), config.a, c - config.a),
                         nn::slice_channels(at(i + config.n), c - config.a, c)};
    out.push_back(nn::concat_channels(parts));
  }
  return out;
}

AsfNet::AsfNet(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  flow_ = config_.use_flow ? make_flow_estimator(config_.flow) : make_flow_estimator("zero");
  Rng rng(mix_seed(config_.seed, 0x61736623));
  const int c = config_.channels;
  const int k = config_.kernel;

  add_conv("extractor.conv_in", c, 3, 3, 1.0, rng);
  for (int i = 0; i < config_.extractor_blocks; ++i) {
    add_conv(block("extractor", i) + ".conv1", c, c, 3, std::sqrt(2.0), rng);
    add_conv(block("extractor", i) + ".conv2", c, c, 3, 0.1, rng);
  }

  for (int i = 0; i < 3; ++i) add_conv("align.branch" + std::to_string(i), c, 2 * c, 3, std::sqrt(2.0), rng);
  // Zero projection: offsets start out equal to the optical flow.
  add_conv("align.offset", 2 * k * k, 3 * c, 3, 0.0, rng);
  add_conv("align.deform", c, c, k, 1.0, rng);

  if (config_.use_shift) add_conv("shift_gate", c, c, 3, 1.0, rng);

  add_conv("fusion.merge", c, config_.frames * c, 1, 1.0, rng);
  const int hidden = std::max(1, c / config_.attention_reduction);
  for (int i = 0; i < config_.fusion_blocks; ++i) {
    const std::string b = block("fusion", i);
    add_conv(b + ".conv1", c, c, 3, std::sqrt(2.0), rng);
    add_conv(b + ".conv2", c, c, 3, 0.1, rng);
    add_conv(b + ".ca.squeeze", hidden, c, 1, std::sqrt(2.0), rng);
    add_conv(b + ".ca.excite", c, hidden, 1, 1.0, rng);
  }
  add_conv("reconstruct", 3, c, 3, 0.1, rng);
}

void AsfNet::add_conv(const std::string& name, int out, int in, int k, double gain, Rng& rng) {
  params_.add(name + ".weight", nn::uniform_init({out, in, k, k}, in * k * k, gain, rng));
  params_.add(name + ".bias", nn::Tensor({out}));
}

Var AsfNet::conv(const std::string& name, const Var& x, nn::Conv2dOptions options) {
  return nn::conv2d(x, params_.get(name + ".weight"), params_.get(name + ".bias"), options);
}

void AsfNet::set_flow_estimator(std::shared_ptr<const FlowEstimator> flow) {
  if (!flow) throw PreconditionError("flow estimator must not be null");
  flow_ = std::move(flow);
}

Var AsfNet::extract(const Var& frame) {
  Var x = conv("extractor.conv_in", frame);
  for (int i = 0; i < config_.extractor_blocks; ++i) {
    const std::string b = block("extractor", i);
    x = nn::add(x, conv(b + ".conv2", nn::relu(conv(b + ".conv1", x))));
  }
  return x;
}

std::vector<Var> AsfNet::extract_features(std::span<const Var> frames) {
  if (frames.empty()) throw PreconditionError("extract_features needs at least one frame");
  std::vector<Var> out;
  out.reserve(frames.size());
  for (const Var& f : frames) out.push_back(extract(f));
  return out;
}

Var AsfNet::align_neighbor(const Var& target, const Var& neighbor, const Var& flow) {
  nn::require_same_shape(target->value, neighbor->value, "align_neighbor");
  const Tensor& fv = flow->value;
  if (fv.rank() != 3 || fv.dim(0) != 2 || fv.dim(1) != target->value.dim(1) ||
      fv.dim(2) != target->value.dim(2)) {
    throw ShapeMismatchError("align_neighbor: flow " + fv.shape_string() + " does not match features " +
                             target->value.shape_string());
  }
  const Var warped = config_.use_flow ? nn::warp(neighbor, flow) : neighbor;
  const Var pair[] = {warped, target};
  const Var joint = nn::concat_channels(pair);
  std::vector<Var> branches;
  for (int i = 0; i < 3; ++i) {
    const int d = config_.use_dilation ? config_.dilations[static_cast<std::size_t>(i)] : 1;
    branches.push_back(nn::relu(conv("align.branch" + std::to_string(i), joint, {d, nn::Padding::zeros})));
  }
  Var offsets = conv("align.offset", nn::concat_channels(branches));
  if (config_.use_flow) offsets = nn::add(nn::repeat_channels(flow, config_.kernel * config_.kernel), offsets);
  return nn::deform_conv2d(neighbor, offsets, params_.get("align.deform.weight"),
                           params_.get("align.deform.bias"));
}

Var AsfNet::adaptive_gate(const Var& shifted) {
  return nn::add(nn::mul(shifted, nn::sigmoid(conv("shift_gate", shifted))), shifted);
}

Var AsfNet::fuse(std::span<const Var> stack) {
  if (static_cast<int>(stack.size()) != config_.frames) {
    throw ShapeMismatchError("fuse expects " + std::to_string(config_.frames) + " frames, got " +
                             std::to_string(stack.size()));
  }
  const Var merged = conv("fusion.merge", nn::concat_channels(stack));
  Var x = merged;
  for (int i = 0; i < config_.fusion_blocks; ++i) {
    const std::string b = block("fusion", i);
    const Var body = conv(b + ".conv2", nn::relu(conv(b + ".conv1", x)));
    const nn::ChannelAttentionParams ca{params_.get(b + ".ca.squeeze.weight"), params_.get(b + ".ca.squeeze.bias"),
                                        params_.get(b + ".ca.excite.weight"), params_.get(b + ".ca.excite.bias")};
    x = nn::add(x, nn::channel_attention(body, ca));
  }
  return config_.fusion_blocks > 0 ? nn::add(merged, x) : merged;
}

Var AsfNet::reconstruct(const Var& fused, const Var& center) {
  return nn::clamp(nn::add(center, conv("reconstruct", fused)), 0.0, 1.0);
}

std::vector<Var> AsfNet::forward(std::span<const Var> frames) {
  if (frames.empty()) throw PreconditionError("forward needs a clip with T >= 1");
  const int count = static_cast<int>(frames.size());
  const int half = config_.frames / 2;
  const std::vector<Var> features = extract_features(frames);
  const Tensor& f0 = features.front()->value;
  const Var zero_flow = nn::constant(Tensor({2, f0.dim(1), f0.dim(2)}));

  // Window slots are often repeated (edge replication, overlapping windows), so
  // each (target, neighbor) alignment is computed once and shared in the graph.
  std::map<std::pair<int, int>, Var> aligned;
  auto align = [&](int t, int s) {
    const auto key = std::make_pair(t, s);
    if (auto it = aligned.find(key); it != aligned.end()) return it->second;
    Var flow = zero_flow;
    if (s != t && config_.use_flow) flow = nn::constant(flow_->estimate(frames[t]->value, frames[s]->value));
    Var result = align_neighbor(features[t], features[s], flow);
    aligned.emplace(key, result);
    return result;
  };

  std::vector<Var> out;
  out.reserve(frames.size());
  for (int t = 0; t < count; ++t) {
    std::vector<Var> stack;
    for (int j = -half; j <= half; ++j) stack.push_back(align(t, std::clamp(t + j, 0, count - 1)));
    if (config_.use_shift) {
      stack = temporal_shift(stack, {config_.resolved_shift(), config_.shift_distance});
      for (Var& f : stack) f = adaptive_gate(f);
    }
    out.push_back(reconstruct(fuse(stack), frames[t]));
  }
  return out;
}

std::vector<Var> AsfNet::forward(const data::VideoClip& clip) {
  clip.validate();
  std::vector<Var> frames;
  for (const auto& f : clip.frames) frames.push_back(nn::constant(f));
  return forward(frames);
}

data::VideoClip AsfNet::restore(const data::VideoClip& clip) {
  nn::NoGradGuard guard;
  data::VideoClip out;
  out.role = data::Role::restored;
  for (const Var& v : forward(clip)) out.frames.push_back(v->value);
  return out;
}

data::Checkpoint AsfNet::to_checkpoint() const {
  data::Checkpoint ck;
  ck.meta["model"] = to_json(config_);
  for (const auto& [name, var] : params_.entries()) ck.arrays.push_back({name, var->value});
  return ck;
}

void AsfNet::load(const data::Checkpoint& checkpoint) {
  if (checkpoint.meta.contains("model")) {
    const ModelConfig stored = model_config_from_json(checkpoint.meta.at("model"));
    const json a = to_json(stored), b = to_json(config_);
    for (const char* key : {"channels", "frames", "extractor_blocks", "fusion_blocks", "attention_reduction",
                            "kernel", "use_shift"}) {
      if (a.at(key) != b.at(key)) {
        throw data::CheckpointError(std::string("checkpoint model field '") + key + "' is " + a.at(key).dump() +
                                    ", expected " + b.at(key).dump());
      }
    }
  }
  for (const auto& [name, var] : params_.entries()) {
    const Tensor* stored = checkpoint.find(name);
    if (stored == nullptr) throw data::CheckpointError("checkpoint lacks parameter '" + name + "'");
    if (!stored->same_shape(var->value)) {
      throw data::CheckpointError("checkpoint parameter '" + name + "' has shape " + stored->shape_string() +
                                  ", expected " + var->value.shape_string());
    }
  }
  for (const auto& [name, var] : params_.entries()) var->value = *checkpoint.find(name);
}

}  // namespace asf::net
