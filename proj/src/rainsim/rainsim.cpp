#include "asf/rainsim/rainsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace asf::rainsim {
namespace {

using nlohmann::json;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

void check_range(const std::array<double, 2>& r, const char* name) {
  if (!(r[0] <= r[1])) {
    throw RainConfigError(std::string(name) + " must satisfy min <= max");
  }
}

// Horizontal interval heads are spawned from, widened so slanted rain still
// covers the whole frame.
std::array<double, 2> spawn_span(const RainConfig& config, FrameSize size) {
  const double drift = size.height * std::tan(deg2rad(config.direction));
  return {-std::max(0.0, drift), size.width + std::max(0.0, -drift)};
}

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0);
  const double cx = ax + t * dx - px, cy = ay + t * dy - py;
  return std::sqrt(cx * cx + cy * cy);
}

std::array<double, 2> streak_direction(const Particle& p) {
  const double speed = std::hypot(p.vx, p.vy);
  if (speed == 0.0) return {0.0, 1.0};
  return {p.vx / speed, p.vy / speed};
}

template <typename T>
T read_field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw RainConfigError(std::string("rain config field '") + key + "' has the wrong type");
  }
}

}  // namespace

void RainConfig::validate() const {
  check_range(intensity_range, "intensity_range");
  check_range(length_range, "length_range");
  check_range(width_range, "width_range");
  if (intensity_range[0] < 0.0 || intensity_range[1] > 1.0) {
    throw RainConfigError("intensity_range must lie within [0, 1]");
  }
  if (length_range[0] < 0.0 || width_range[0] <= 0.0) {
    throw RainConfigError("streak length must be >= 0 and width > 0");
  }
  if (!(spawn_rate >= 0.0)) throw RainConfigError("spawn_rate must be >= 0");
  if (depth_layers < 1) throw RainConfigError("depth_layers must be >= 1");
  if (!(std::abs(direction) < 90.0)) throw RainConfigError("direction must be within (-90, 90) degrees");
}

json to_json(const RainConfig& c) {
  return {{"direction", c.direction},
          {"wind", c.wind},
          {"gravity", c.gravity},
          {"spawn_rate", c.spawn_rate},
          {"intensity_range", c.intensity_range},
          {"length_range", c.length_range},
          {"width_range", c.width_range},
          {"depth_layers", c.depth_layers},
          {"seed", c.seed}};
}

RainConfig rain_config_from_json(const json& j) {
  if (!j.is_object()) throw RainConfigError("rain config must be an object");
  static const char* kKeys[] = {"direction",       "wind",        "gravity",
                                "spawn_rate",      "intensity_range", "length_range",
                                "width_range",     "depth_layers", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
        std::end(kKeys)) {
      throw RainConfigError("unknown rain config field '" + key + "'");
    }
  }
  RainConfig c;
  c.direction = read_field(j, "direction", c.direction);
  c.wind = read_field(j, "wind", c.wind);
  c.gravity = read_field(j, "gravity", c.gravity);
  c.spawn_rate = read_field(j, "spawn_rate", c.spawn_rate);
  c.intensity_range = read_field(j, "intensity_range", c.intensity_range);
  c.length_range = read_field(j, "length_range", c.length_range);
  c.width_range = read_field(j, "width_range", c.width_range);
  c.depth_layers = read_field(j, "depth_layers", c.depth_layers);
  c.seed = read_field(j, "seed", c.seed);
  c.validate();
  return c;
}

double layer_factor(int layer) { return std::pow(0.6, layer); }

Particle spawn_particle(const RainConfig& config, double x, double y, Rng& rng) {
  Particle p;
  p.layer = rng.uniform_int(0, config.depth_layers - 1);
  const double f = layer_factor(p.layer);
  p.x = x;
  p.y = y;
  // A streak is the motion blur of one frame: its length is the distance the
  // drop covers per frame, so it doubles as the initial speed.
  p.length = rng.uniform(config.length_range[0], config.length_range[1]) * f;
  const double theta = deg2rad(config.direction);
  p.vx = p.length * std::sin(theta);
  p.vy = p.length * std::cos(theta);
  p.width = rng.uniform(config.width_range[0], config.width_range[1]);
  p.intensity = rng.uniform(config.intensity_range[0], config.intensity_range[1]) * f;
  return p;
}

ParticleState init_particles(const RainConfig& config, FrameSize size) {
  config.validate();
  ParticleState state{{}, Rng(config.seed)};
  double mean_factor = 0.0;
  for (int l = 0; l < config.depth_layers; ++l) mean_factor += layer_factor(l);
  mean_factor /= config.depth_layers;
  const double mean_length = 0.5 * (config.length_range[0] + config.length_range[1]) * mean_factor;
  const double mean_vy = mean_length * std::cos(deg2rad(config.direction));
  const double lifetime = mean_vy > 0.0 ? (size.height + mean_length) / mean_vy : size.height;
  const int count = state.rng.poisson(config.spawn_rate * lifetime);
  const auto span = spawn_span(config, size);
  for (int i = 0; i < count; ++i) {
    const double x = state.rng.uniform(span[0], span[1]);
    const double y = state.rng.uniform(0.0, size.height + mean_length);
    state.particles.push_back(spawn_particle(config, x, y, state.rng));
  }
  return state;
}

ParticleState step_particles(ParticleState state, const RainConfig& config, FrameSize size) {
  const double reach = size.height + config.length_range[1] + 2.0;
  std::vector<Particle> alive;
  alive.reserve(state.particles.size());
  for (Particle p : state.particles) {
    p.x += p.vx;
    p.y += p.vy;
    p.vx += config.wind;
    p.vy += config.gravity;
    const auto dir = streak_direction(p);
    const double tail_y = p.y - p.length * dir[1];
    const double top = std::min(p.y, tail_y);
    const double left = std::min(p.x, p.x - p.length * dir[0]);
    const double right = std::max(p.x, p.x - p.length * dir[0]);
    const bool below = top > size.height + p.width;
    const bool sideways = right < -reach || left > size.width + reach;
    const bool above = p.y < -reach && p.vy <= 0.0;
    if (!below && !sideways && !above) alive.push_back(p);
  }
  state.particles = std::move(alive);

  const int born = state.rng.poisson(config.spawn_rate);
  const auto span = spawn_span(config, size);
  for (int i = 0; i < born; ++i) {
    const double x = state.rng.uniform(span[0], span[1]);
    Particle p = spawn_particle(config, x, 0.0, state.rng);
    // Head just above the top edge so it enters on the next step.
    p.y = -state.rng.uniform(0.0, std::max(p.vy, 1.0));
    state.particles.push_back(p);
  }
  return state;
}

nn::Tensor render_streaks(const ParticleState& state, FrameSize size) {
  std::vector<double> acc(static_cast<std::size_t>(size.height) * size.width, 0.0);
  for (const Particle& p : state.particles) {
    const auto dir = streak_direction(p);
    const double tx = p.x - p.length * dir[0];
    const double ty = p.y - p.length * dir[1];
    const double reach = 0.5 * p.width + 0.5;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(p.x, tx) - reach)));
    const int x1 = std::min(size.width - 1, static_cast<int>(std::ceil(std::max(p.x, tx) + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(p.y, ty) - reach)));
    const int y1 = std::min(size.height - 1, static_cast<int>(std::ceil(std::max(p.y, ty) + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = point_segment_distance(x, y, tx, ty, p.x, p.y);
        const double coverage = std::clamp(reach - d, 0.0, 1.0);
        if (coverage > 0.0) acc[static_cast<std::size_t>(y) * size.width + x] += p.intensity * coverage;
      }
    }
  }
  nn::Tensor frame({3, size.height, size.width});
  const std::size_t plane = acc.size();
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = std::min(acc[i], 1.0);
    frame[i] = frame[plane + i] = frame[2 * plane + i] = v;
  }
  return frame;
}

std::array<double, 2> mean_velocity(const ParticleState& state) {
  if (state.particles.empty()) return {0.0, 0.0};
  double vx = 0.0, vy = 0.0;
  for (const auto& p : state.particles) {
    vx += p.vx;
    vy += p.vy;
  }
  const auto n = static_cast<double>(state.particles.size());
  return {vx / n, vy / n};
}

RainTrace synthesize_rain_video_traced(const RainConfig& config, int length, FrameSize size) {
  if (length < 1) throw PreconditionError("rain video needs at least one frame");
  RainTrace trace;
  trace.streaks.role = data::Role::streak;
  ParticleState state = init_particles(config, size);
  for (int t = 0; t < length; ++t) {
    trace.streaks.frames.push_back(render_streaks(state, size));
    trace.mean_velocity.push_back(mean_velocity(state));
    if (t + 1 < length) state = step_particles(std::move(state), config, size);
  }
  return trace;
}

data::VideoClip synthesize_rain_video(const RainConfig& config, int length, FrameSize size) {
  return synthesize_rain_video_traced(config, length, size).streaks;
}

data::VideoClip composite(const data::VideoClip& clean, const data::VideoClip& streaks) {
  if (!data::same_geometry(clean, streaks) || clean.frames.empty()) {
    throw ShapeMismatchError("composite: clean clip and streak clip differ in (T, H, W)");
  }
  data::VideoClip out;
  out.role = data::Role::rainy;
  for (int t = 0; t < clean.length(); ++t) {
    nn::Tensor f = clean.frames[t];
    const nn::Tensor& s = streaks.frames[t];
    for (std::size_t i = 0; i < f.numel(); ++i) f[i] = std::min(f[i] + s[i], 1.0);
    out.frames.push_back(std::move(f));
  }
  return out;
}

data::VideoClip synthesize_background(const BackgroundConfig& config, int length, FrameSize size) {
  Rng rng(config.seed);
  struct Blob {
    double cx, cy, sigma;
    std::array<double, 3> amplitude;
  };
  struct Wave {
    double kx, ky, phase;
    std::array<double, 3> amplitude;
  };
  // Blobs live on a domain that covers the frame for the whole clip.
  const double ext_x = std::abs(config.motion[0]) * length + size.width;
  const double ext_y = std::abs(config.motion[1]) * length + size.height;
  std::vector<Blob> blobs;
  for (int b = 0; b < config.blobs; ++b) {
    Blob blob{rng.uniform(-ext_x / 2, size.width + ext_x / 2), rng.uniform(-ext_y / 2, size.height + ext_y / 2),
              rng.uniform(3.0, 10.0), {}};
    for (double& a : blob.amplitude) a = rng.uniform(-0.22, 0.22);
    blobs.push_back(blob);
  }
  std::vector<Wave> waves;
  for (int w = 0; w < 3; ++w) {
    const double period = rng.uniform(7.0, 20.0);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    Wave wave{2 * std::numbers::pi / period * std::cos(angle), 2 * std::numbers::pi / period * std::sin(angle),
              rng.uniform(0.0, 2 * std::numbers::pi), {}};
    for (double& a : wave.amplitude) a = rng.uniform(0.02, 0.07);
    waves.push_back(wave);
  }
  std::array<double, 3> base{};
  for (double& b : base) b = rng.uniform(0.3, 0.5);

  data::VideoClip clip;
  clip.role = data::Role::clean;
  for (int t = 0; t < length; ++t) {
    nn::Tensor f({3, size.height, size.width});
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        const double u = x - config.motion[0] * t;
        const double v = y - config.motion[1] * t;
        for (int c = 0; c < 3; ++c) {
          double value = base[c];
          for (const auto& b : blobs) {
            const double r2 = (u - b.cx) * (u - b.cx) + (v - b.cy) * (v - b.cy);
            value += b.amplitude[c] * std::exp(-r2 / (2 * b.sigma * b.sigma));
          }
          for (const auto& w : waves) value += w.amplitude[c] * std::sin(w.kx * u + w.ky * v + w.phase);
          f.at(c, y, x) = std::clamp(value, 0.05, 0.8);
        }
      }
    }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

double frame_correlation(const nn::Tensor& a, const nn::Tensor& b) {
  nn::require_same_shape(a, b, "frame_correlation");
  const auto n = static_cast<double>(a.numel());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

nn::Tensor shift_frame(const nn::Tensor& frame, double dx, double dy) {
  nn::require_rank(frame, 3, "shift_frame");
  const int channels = frame.dim(0), height = frame.dim(1), width = frame.dim(2);
  nn::Tensor out({channels, height, width});
  auto fetch = [&](int c, int y, int x) {
    return (x < 0 || y < 0 || x >= width || y >= height) ? 0.0 : frame.at(c, y, x);
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double sx = x - dx, sy = y - dy;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < channels; ++c) {
        out.at(c, y, x) = (1 - fy) * ((1 - fx) * fetch(c, y0, x0) + fx * fetch(c, y0, x0 + 1)) +
                          fy * ((1 - fx) * fetch(c, y0 + 1, x0) + fx * fetch(c, y0 + 1, x0 + 1));
      }
    }
  }
  return out;
}

}  // namespace asf::rainsim
