#include <doctest.h>

#include "asf/rainsim/rainsim.hpp"
#include "support.hpp"

using namespace asf;
using namespace asf::rainsim;

namespace {

RainConfig still_config() {
  RainConfig c;
  c.spawn_rate = 0.0;
  return c;
}

Particle vertical(double x, double y, double vy, double length, double intensity) {
  Particle p;
  p.x = x;
  p.y = y;
  p.vy = vy;
  p.length = length;
  p.width = 1.0;
  p.intensity = intensity;
  return p;
}

}  // namespace

TEST_SUITE("rainsim") {
  TEST_CASE("zero spawn rate gives an empty warm start") {
    const ParticleState s = init_particles(still_config(), {32, 32});
    CHECK(s.particles.empty());
    const nn::Tensor frame = render_streaks(s, {32, 32});
    for (double v : frame.values()) CHECK(v == 0.0);
  }

  TEST_CASE("init is deterministic in the seed and vertical without wind") {
    RainConfig c;
    c.seed = 11;
    const ParticleState a = init_particles(c, {48, 40});
    const ParticleState b = init_particles(c, {48, 40});
    REQUIRE(a.particles.size() == b.particles.size());
    CHECK(!a.particles.empty());
    for (std::size_t i = 0; i < a.particles.size(); ++i) {
      CHECK(a.particles[i].x == b.particles[i].x);
      CHECK(a.particles[i].y == b.particles[i].y);
      CHECK(a.particles[i].vx == 0.0);
    }
    CHECK(a.rng == b.rng);
  }

  TEST_CASE("a step advances position by velocity") {
    ParticleState s;
    s.particles.push_back(vertical(10, 10, 5, 4, 0.5));
    const ParticleState next = step_particles(s, still_config(), {64, 64});
    REQUIRE(next.particles.size() == 1);
    CHECK(next.particles[0].x == 10.0);
    CHECK(next.particles[0].y == 15.0);
  }

  TEST_CASE("gravity and wind change velocity by exactly one acceleration") {
    RainConfig c = still_config();
    c.gravity = 0.75;
    c.wind = -0.25;
    ParticleState s;
    s.particles.push_back(vertical(10, 10, 5, 4, 0.5));
    const ParticleState next = step_particles(s, c, {64, 64});
    REQUIRE(next.particles.size() == 1);
    CHECK(next.particles[0].vy == 5.75);
    CHECK(next.particles[0].vx == -0.25);
  }

  TEST_CASE("a particle whose streak leaves through the bottom is culled") {
    ParticleState s;
    s.particles.push_back(vertical(10, 60, 20, 4, 0.5));
    CHECK(step_particles(s, still_config(), {64, 64}).particles.empty());
  }

  TEST_CASE("new particles enter from above the top edge") {
    RainConfig c;
    c.spawn_rate = 20.0;
    c.seed = 4;
    ParticleState s;
    s.rng = Rng(4);
    const ParticleState next = step_particles(s, c, {32, 32});
    CHECK(!next.particles.empty());
    for (const auto& p : next.particles) CHECK(p.y <= 0.0);
  }

  TEST_CASE("one vertical streak rasterizes to a single column at its intensity") {
    ParticleState s;
    s.particles.push_back(vertical(10, 20, 5, 6, 0.5));
    const nn::Tensor f = render_streaks(s, {32, 32});
    double peak = 0.0;
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
          const double v = f.at(c, y, x);
          peak = std::max(peak, v);
          if (x == 10 && y >= 14 && y <= 20) {
            CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
          } else {
            CHECK(v == 0.0);
          }
        }
      }
    }
    CHECK(peak == 0.5);
  }

  TEST_CASE("coincident streaks saturate at one") {
    ParticleState s;
    s.particles.push_back(vertical(10, 20, 5, 6, 0.7));
    s.particles.push_back(vertical(10, 20, 5, 6, 0.7));
    const nn::Tensor f = render_streaks(s, {32, 32});
    CHECK(*std::max_element(f.values().begin(), f.values().end()) == 1.0);
  }

  TEST_CASE("a one-frame video is the render of the warm start") {
    RainConfig c;
    c.seed = 2;
    const auto clip = synthesize_rain_video(c, 1, {24, 20});
    REQUIRE(clip.length() == 1);
    CHECK(clip.role == data::Role::streak);
    CHECK(clip.frames[0] == render_streaks(init_particles(c, {24, 20}), {24, 20}));
  }

  TEST_CASE("rain videos are deterministic and nonnegative") {
    RainConfig c;
    c.seed = 3;
    c.direction = 15;
    c.wind = 0.1;
    const auto a = synthesize_rain_video(c, 6, {32, 32});
    const auto b = synthesize_rain_video(c, 6, {32, 32});
    CHECK(a.frames == b.frames);
    for (const auto& f : a.frames)
      for (double v : f.values()) CHECK((v >= 0.0 && v <= 1.0));
  }

  TEST_CASE("velocity-shifted consecutive frames correlate better than unshifted ones") {
    for (std::uint64_t seed : {1, 2, 3}) {
      RainConfig c;
      c.seed = seed;
      const RainTrace trace = synthesize_rain_video_traced(c, 8, {96, 96});
      double shifted = 0.0, plain = 0.0;
      for (int k = 0; k + 1 < 8; ++k) {
        const auto& v = trace.mean_velocity[static_cast<std::size_t>(k)];
        shifted += frame_correlation(shift_frame(trace.streaks.frames[k], v[0], v[1]), trace.streaks.frames[k + 1]);
        plain += frame_correlation(trace.streaks.frames[k], trace.streaks.frames[k + 1]);
      }
      CHECK(shifted > plain);
    }
  }

  TEST_CASE("composite is linear superposition clamped at one") {
    data::VideoClip clean = data::make_clip(2, 4, 4, data::Role::clean, 0.375);  // dyadic, so O - S is exact
    clean.frames[1].at(0, 0, 0) = 0.9;
    data::VideoClip streak = data::make_clip(2, 4, 4, data::Role::streak, 0.0);
    CHECK(composite(clean, streak).frames == clean.frames);

    streak.frames[0].fill(0.25);
    streak.frames[1].at(0, 0, 0) = 0.5;
    const auto rainy = composite(clean, streak);
    CHECK(rainy.role == data::Role::rainy);
    CHECK(rainy.frames[1].at(0, 0, 0) == 1.0);
    for (std::size_t i = 0; i < rainy.frames[0].numel(); ++i)
      CHECK(rainy.frames[0][i] - streak.frames[0][i] == clean.frames[0][i]);

    CHECK_THROWS_AS(composite(clean, data::make_clip(2, 4, 5, data::Role::streak)), ShapeMismatchError);
  }

  TEST_CASE("rain configs round-trip and reject bad values") {
    RainConfig c;
    c.direction = 20;
    c.depth_layers = 2;
    c.seed = 99;
    const RainConfig back = rain_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    auto j = to_json(c);
    j["bogus"] = 1;
    CHECK_THROWS_AS(rain_config_from_json(j), RainConfigError);
    c.length_range = {5, 2};
    CHECK_THROWS_AS(c.validate(), RainConfigError);
    c = RainConfig{};
    c.spawn_rate = -1;
    CHECK_THROWS_AS(c.validate(), RainConfigError);
    c = RainConfig{};
    c.intensity_range = {0.2, 1.5};
    CHECK_THROWS_AS(c.validate(), RainConfigError);
    CHECK(layer_factor(2) == doctest::Approx(0.36));
  }
}
