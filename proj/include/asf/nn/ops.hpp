#pragma once

#include <span>
#include <vector>

#include "asf/nn/autograd.hpp"

namespace asf::nn {

enum class Padding { zeros, replicate };

struct Conv2dOptions {
  int dilation = 1;
  Padding padding = Padding::zeros;
};

// Stride-1 "same" convolution. x: C x H x W, weight: O x C x kh x kw (odd
// kernel sizes), bias: O or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options = {});

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var clamp(const Var& x, double lo, double hi);

Var concat_channels(std::span<const Var> parts);
Var slice_channels(const Var& x, int begin, int end);
// Stacks `times` copies of x along the channel axis.
Var repeat_channels(const Var& x, int times);

// C x H x W -> C x 1 x 1 mean over space.
Var global_avg_pool(const Var& x);
// Multiplies each channel of x (C x H x W) by gate (C x 1 x 1).
Var mul_channels(const Var& x, const Var& gate);

// Mean of |pred - target| over all elements; a 1-element tensor.
Var mean_abs_error(const Var& pred, const Var& target);

// Bilinear interpolation of feature (C x H x W) at absolute positions
// coords (2 x Ho x Wo, x then y). Out-of-range taps replicate the border.
Var bilinear_sample(const Var& feature, const Var& coords);

// warp(F, flow)(p) = F sampled at p + flow(p).
Var warp(const Var& feature, const Var& flow);

// Unmodulated deformable convolution. offsets: 2K x H x W where K = kh*kw;
// channels (2k, 2k+1) hold the (dx, dy) displacement of tap k (row-major
// kernel order). Taps sample with border replication.
Var deform_conv2d(const Var& x, const Var& offsets, const Var& weight, const Var& bias);

struct ChannelAttentionParams {
  Var squeeze_weight;  // hidden x C x 1 x 1
  Var squeeze_bias;    // hidden
  Var excite_weight;   // C x hidden x 1 x 1
  Var excite_bias;     // C
};

// x * sigmoid(W2 relu(W1 gap(x) + b1) + b2), one gate per channel.
Var channel_attention(const Var& x, const ChannelAttentionParams& params);

}  // namespace asf::nn
