#pragma once

#include <array>
#include <vector>

#include <json.hpp>

#include "asf/common/rng.hpp"
#include "asf/datastore/datastore.hpp"

namespace asf::rede {

enum class OpKind { rotation, zoom, translation, shear };

// rotation: a = degrees; zoom: a = factor; translation: (a, b) = (dx, dy) px;
// shear: a = horizontal shear factor.
struct TransformOp {
  OpKind kind = OpKind::translation;
  double a = 0.0;
  double b = 0.0;
};

struct TransformChain {
  std::vector<TransformOp> ops;
};

struct Ranges {
  double max_rotation = 45.0;       // degrees, symmetric
  double min_zoom = 0.5;
  double max_zoom = 2.0;
  double max_translation = 0.25;    // fraction of the frame size, symmetric
  double max_shear = 0.3;

  void validate() const;
};

nlohmann::json to_json(const Ranges& ranges);
Ranges ranges_from_json(const nlohmann::json& j);

// Length uniform on {1, 2, 3}, op kinds uniform over the four, parameters
// uniform over `ranges`; translations scale with the frame size.
TransformChain sample_chain(Rng& rng, int height, int width, const Ranges& ranges = {});

// True if every op lies inside `ranges` for a frame of the given size.
bool within_ranges(const TransformChain& chain, int height, int width, const Ranges& ranges = {});

// 2 x 3 forward affine map of the whole chain (ops applied in order, each
// about the frame centre).
std::array<double, 6> chain_matrix(const TransformChain& chain, int height, int width);

// Inverse-maps every output pixel through the chain and samples bilinearly;
// positions outside the frame read zero. Output clamped to >= 0.
nn::Tensor apply_chain(const nn::Tensor& frame, const TransformChain& chain);
// The same chain applied to every frame.
data::VideoClip apply_chain(const data::VideoClip& clip, const TransformChain& chain);

struct MixCoefficients {
  double w1 = 0.5;
  double w2 = 0.5;
  double m = 0.0;
};

MixCoefficients sample_mix(Rng& rng);

// The full draw of one ReDe call.
struct Draw {
  bool real_base = true;  // base layer is S_U (true) or S_L
  TransformChain chain1, chain2;
  MixCoefficients mix;
};

// m * S + (1 - m) * (w1 * T1(S) + w2 * T2(S)), clamped to [0, 1].
data::VideoClip rede_with(const data::VideoClip& base, const TransformChain& chain1,
                          const TransformChain& chain2, const MixCoefficients& mix);

// Draw order: base coin, chain 1, chain 2, mix. Role of the result is streak.
data::VideoClip rede(const data::VideoClip& s_u, const data::VideoClip& s_l, Rng& rng,
                     const Ranges& ranges = {}, Draw* draw = nullptr);

}  // namespace asf::rede
