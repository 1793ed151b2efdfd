#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "asf/common/rng.hpp"
#include "asf/datastore/datastore.hpp"

namespace asf::rainsim {

ASF_DEFINE_ERROR(RainConfigError);

struct RainConfig {
  double direction = 0.0;   // degrees from vertical, positive leans right
  double wind = 0.0;        // horizontal acceleration, px / frame^2
  double gravity = 0.0;     // vertical acceleration, px / frame^2
  double spawn_rate = 6.0;  // expected new particles per frame
  std::array<double, 2> intensity_range{0.25, 0.6};
  std::array<double, 2> length_range{8.0, 16.0};
  std::array<double, 2> width_range{1.0, 1.5};
  int depth_layers = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const RainConfig& config);
// Strict: unknown keys and wrong types raise RainConfigError.
RainConfig rain_config_from_json(const nlohmann::json& j);

// Speed, length and intensity multiplier of a depth layer: 0.6^layer.
double layer_factor(int layer);

struct Particle {
  double x = 0.0, y = 0.0;    // head position, px
  double vx = 0.0, vy = 0.0;  // px / frame
  double length = 0.0;
  double width = 1.0;
  double intensity = 0.0;
  int layer = 0;
};

struct FrameSize {
  int height = 0;
  int width = 0;
};

struct ParticleState {
  std::vector<Particle> particles;
  Rng rng;
};

// Samples a particle of the given layer with its head at (x, y).
Particle spawn_particle(const RainConfig& config, double x, double y, Rng& rng);

// Warm start: Poisson(spawn_rate * expected lifetime) particles spread over
// the frame so the first frame already carries rain.
ParticleState init_particles(const RainConfig& config, FrameSize size);

// x += v; v += (wind, gravity); cull particles whose streak left the frame;
// spawn Poisson(spawn_rate) particles just above the top edge.
ParticleState step_particles(ParticleState state, const RainConfig& config, FrameSize size);

// Anti-aliased segments from each head back along -v for `length` px;
// overlapping streaks add and saturate at 1. Monochrome replicated to RGB.
nn::Tensor render_streaks(const ParticleState& state, FrameSize size);

// Mean per-frame displacement of the live particles.
std::array<double, 2> mean_velocity(const ParticleState& state);

struct RainTrace {
  data::VideoClip streaks;
  std::vector<std::array<double, 2>> mean_velocity;  // per frame
};

data::VideoClip synthesize_rain_video(const RainConfig& config, int length, FrameSize size);
RainTrace synthesize_rain_video_traced(const RainConfig& config, int length, FrameSize size);

// O = min(B + S, 1) elementwise; role rainy.
data::VideoClip composite(const data::VideoClip& clean, const data::VideoClip& streaks);

// Smooth procedural background that translates by `motion` px per frame.
struct BackgroundConfig {
  std::array<double, 2> motion{1.0, 0.0};
  int blobs = 6;
  std::uint64_t seed = 0;
};
data::VideoClip synthesize_background(const BackgroundConfig& config, int length, FrameSize size);

// Pearson correlation of two equally sized frames.
double frame_correlation(const nn::Tensor& a, const nn::Tensor& b);
// Frame translated by (dx, dy) with bilinear sampling and zero fill.
nn::Tensor shift_frame(const nn::Tensor& frame, double dx, double dy);

}  // namespace asf::rainsim
