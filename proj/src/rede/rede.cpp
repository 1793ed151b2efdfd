#include "asf/rede/rede.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace asf::rede {
namespace {

using Affine = std::array<double, 6>;  // [a b tx; c d ty]

Affine compose(const Affine& outer, const Affine& inner) {
  return {outer[0] * inner[0] + outer[1] * inner[3],
          outer[0] * inner[1] + outer[1] * inner[4],
          outer[0] * inner[2] + outer[1] * inner[5] + outer[2],
          outer[3] * inner[0] + outer[4] * inner[3],
          outer[3] * inner[1] + outer[4] * inner[4],
          outer[3] * inner[2] + outer[4] * inner[5] + outer[5]};
}

// Linear part L about centre c: p -> c + L (p - c) + t.
Affine about_center(double l00, double l01, double l10, double l11, double cx, double cy, double tx = 0,
                    double ty = 0) {
  return {l00, l01, cx - l00 * cx - l01 * cy + tx, l10, l11, cy - l10 * cx - l11 * cy + ty};
}

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("rede field '") + key + "' has the wrong type");
  }
}

}  // namespace

void Ranges::validate() const {
  if (!(max_rotation >= 0.0) || !(max_translation >= 0.0) || !(max_shear >= 0.0)) {
    throw ConfigError("rede ranges must be nonnegative");
  }
  if (!(min_zoom > 0.0 && min_zoom <= max_zoom)) throw ConfigError("rede zoom range must satisfy 0 < min <= max");
}

nlohmann::json to_json(const Ranges& r) {
  return {{"max_rotation", r.max_rotation},
          {"min_zoom", r.min_zoom},
          {"max_zoom", r.max_zoom},
          {"max_translation", r.max_translation},
          {"max_shear", r.max_shear}};
}

Ranges ranges_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("rede ranges must be an object");
  const nlohmann::json known = to_json(Ranges{});
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown rede field '" + key + "'");
  }
  Ranges r;
  read_into(j, "max_rotation", r.max_rotation);
  read_into(j, "min_zoom", r.min_zoom);
  read_into(j, "max_zoom", r.max_zoom);
  read_into(j, "max_translation", r.max_translation);
  read_into(j, "max_shear", r.max_shear);
  r.validate();
  return r;
}

TransformChain sample_chain(Rng& rng, int height, int width, const Ranges& ranges) {
  TransformChain chain;
  const int length = rng.uniform_int(1, 3);
  for (int i = 0; i < length; ++i) {
    TransformOp op;
    op.kind = static_cast<OpKind>(rng.uniform_int(0, 3));
    switch (op.kind) {
      case OpKind::rotation:
        op.a = rng.uniform(-ranges.max_rotation, ranges.max_rotation);
        break;
      case OpKind::zoom:
        op.a = rng.uniform(ranges.min_zoom, ranges.max_zoom);
        break;
      case OpKind::translation:
        op.a = rng.uniform(-ranges.max_translation, ranges.max_translation) * width;
        op.b = rng.uniform(-ranges.max_translation, ranges.max_translation) * height;
        break;
      case OpKind::shear:
        op.a = rng.uniform(-ranges.max_shear, ranges.max_shear);
        break;
    }
    chain.ops.push_back(op);
  }
  return chain;
}

bool within_ranges(const TransformChain& chain, int height, int width, const Ranges& ranges) {
  if (chain.ops.empty() || chain.ops.size() > 3) return false;
  for (const auto& op : chain.ops) {
    switch (op.kind) {
      case OpKind::rotation:
        if (std::abs(op.a) > ranges.max_rotation) return false;
        break;
      case OpKind::zoom:
        if (op.a < ranges.min_zoom || op.a > ranges.max_zoom) return false;
        break;
      case OpKind::translation:
        if (std::abs(op.a) > ranges.max_translation * width || std::abs(op.b) > ranges.max_translation * height)
          return false;
        break;
      case OpKind::shear:
        if (std::abs(op.a) > ranges.max_shear) return false;
        break;
    }
  }
  return true;
}

std::array<double, 6> chain_matrix(const TransformChain& chain, int height, int width) {
  const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
  Affine m{1, 0, 0, 0, 1, 0};
  for (const auto& op : chain.ops) {
    Affine step{};
    switch (op.kind) {
      case OpKind::rotation: {
        const double r = op.a * std::numbers::pi / 180.0;
        step = about_center(std::cos(r), -std::sin(r), std::sin(r), std::cos(r), cx, cy);
        break;
      }
      case OpKind::zoom:
        step = about_center(op.a, 0, 0, op.a, cx, cy);
        break;
      case OpKind::translation:
        step = about_center(1, 0, 0, 1, cx, cy, op.a, op.b);
        break;
      case OpKind::shear:
        step = about_center(1, op.a, 0, 1, cx, cy);
        break;
    }
    m = compose(step, m);
  }
  return m;
}

nn::Tensor apply_chain(const nn::Tensor& frame, const TransformChain& chain) {
  nn::require_rank(frame, 3, "apply_chain");
  const int channels = frame.dim(0), height = frame.dim(1), width = frame.dim(2);
  const Affine m = chain_matrix(chain, height, width);
  const double det = m[0] * m[4] - m[1] * m[3];
  if (std::abs(det) < 1e-12) throw PreconditionError("apply_chain: transform chain is singular");
  // Inverse of the linear part; source = inv * (q - t).
  const double i00 = m[4] / det, i01 = -m[1] / det, i10 = -m[3] / det, i11 = m[0] / det;
  nn::Tensor out({channels, height, width});
  auto fetch = [&](int c, int y, int x) {
    return (x < 0 || y < 0 || x >= width || y >= height) ? 0.0 : frame.at(c, y, x);
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double qx = x - m[2], qy = y - m[5];
      const double sx = i00 * qx + i01 * qy, sy = i10 * qx + i11 * qy;
      if (sx <= -1.0 || sy <= -1.0 || sx >= width || sy >= height) continue;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < channels; ++c) {
        const double v = (1 - fy) * ((1 - fx) * fetch(c, y0, x0) + fx * fetch(c, y0, x0 + 1)) +
                         fy * ((1 - fx) * fetch(c, y0 + 1, x0) + fx * fetch(c, y0 + 1, x0 + 1));
        out.at(c, y, x) = std::max(v, 0.0);
      }
    }
  }
  return out;
}

data::VideoClip apply_chain(const data::VideoClip& clip, const TransformChain& chain) {
  data::VideoClip out;
  out.role = clip.role;
  for (const auto& f : clip.frames) out.frames.push_back(apply_chain(f, chain));
  return out;
}

MixCoefficients sample_mix(Rng& rng) {
  const double u = rng.uniform();
  return {u, 1.0 - u, rng.uniform()};
}

data::VideoClip rede_with(const data::VideoClip& base, const TransformChain& chain1, const TransformChain& chain2,
                          const MixCoefficients& mix) {
  base.validate();
  const data::VideoClip t1 = apply_chain(base, chain1);
  const data::VideoClip t2 = apply_chain(base, chain2);
  data::VideoClip out;
  out.role = data::Role::streak;
  for (int t = 0; t < base.length(); ++t) {
    nn::Tensor f = nn::Tensor::zeros_like(base.frames[t]);
    for (std::size_t i = 0; i < f.numel(); ++i) {
      const double mixed = mix.w1 * t1.frames[t][i] + mix.w2 * t2.frames[t][i];
      f[i] = std::clamp(mix.m * base.frames[t][i] + (1.0 - mix.m) * mixed, 0.0, 1.0);
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

data::VideoClip rede(const data::VideoClip& s_u, const data::VideoClip& s_l, Rng& rng, const Ranges& ranges,
                     Draw* draw) {
  if (!data::same_geometry(s_u, s_l)) {
    throw ShapeMismatchError("rede: S_U and S_L must share (T, H, W)");
  }
  Draw d;
  d.real_base = rng.coin();
  const data::VideoClip& base = d.real_base ? s_u : s_l;
  d.chain1 = sample_chain(rng, base.height(), base.width(), ranges);
  d.chain2 = sample_chain(rng, base.height(), base.width(), ranges);
  d.mix = sample_mix(rng);
  data::VideoClip out = rede_with(base, d.chain1, d.chain2, d.mix);
  if (draw != nullptr) *draw = std::move(d);
  return out;
}

}  // namespace asf::rede
