#include "asf/net/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace asf::net {
namespace {

struct Plane {
  int height = 0, width = 0;
  std::vector<double> v;

  double at(int y, int x) const {
    y = std::clamp(y, 0, height - 1);
    x = std::clamp(x, 0, width - 1);
    return v[static_cast<std::size_t>(y) * width + x];
  }
};

Plane to_plane(const nn::Tensor& frame) {
  const nn::Tensor y = luminance(frame);
  return {y.dim(1), y.dim(2), {y.values().begin(), y.values().end()}};
}

Plane downsample(const Plane& p) {
  Plane out{p.height / 2, p.width / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.height) * out.width);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.v[static_cast<std::size_t>(y) * out.width + x] =
          0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                  p.at(2 * y + 1, 2 * x + 1));
    }
  }
  return out;
}

double sad(const Plane& a, const Plane& b, int y, int x, int dx, int dy, int r) {
  double s = 0.0;
  for (int j = -r; j <= r; ++j) {
    for (int i = -r; i <= r; ++i) s += std::abs(a.at(y + j, x + i) - b.at(y + j + dy, x + i + dx));
  }
  return s;
}

// Integer flow field for one level.
struct Field {
  int height = 0, width = 0;
  std::vector<int> dx, dy;
};

Field match_level(const Plane& a, const Plane& b, const Field* coarse, int radius, int patch) {
  Field f{a.height, a.width, {}, {}};
  const std::size_t n = static_cast<std::size_t>(a.height) * a.width;
  f.dx.assign(n, 0);
  f.dy.assign(n, 0);
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      int cx = 0, cy = 0;
      if (coarse != nullptr) {
        const int yc = std::min(y / 2, coarse->height - 1), xc = std::min(x / 2, coarse->width - 1);
        const std::size_t k = static_cast<std::size_t>(yc) * coarse->width + xc;
        cx = 2 * coarse->dx[k];
        cy = 2 * coarse->dy[k];
      }
      double best = std::numeric_limits<double>::infinity();
      int best_norm = std::numeric_limits<int>::max();
      int bx = cx, by = cy;
      for (int j = -radius; j <= radius; ++j) {
        for (int i = -radius; i <= radius; ++i) {
          const int dx = cx + i, dy = cy + j;
          const double cost = sad(a, b, y, x, dx, dy, patch);
          const int norm = dx * dx + dy * dy;
          if (cost < best - 1e-12 || (std::abs(cost - best) <= 1e-12 && norm < best_norm)) {
            best = cost;
            best_norm = norm;
            bx = dx;
            by = dy;
          }
        }
      }
      const std::size_t k = static_cast<std::size_t>(y) * a.width + x;
      f.dx[k] = bx;
      f.dy[k] = by;
    }
  }
  return f;
}

}  // namespace

nn::Tensor luminance(const nn::Tensor& rgb) {
  nn::require_rank(rgb, 3, "luminance");
  if (rgb.dim(0) != 3) throw ShapeMismatchError("luminance expects 3 channels, got " + rgb.shape_string());
  const int h = rgb.dim(1), w = rgb.dim(2);
  nn::Tensor y({1, h, w});
  const auto r = rgb.channel(0), g = rgb.channel(1), b = rgb.channel(2);
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return y;
}

nn::Tensor ZeroFlow::estimate(const nn::Tensor& a, const nn::Tensor& b) const {
  nn::require_same_shape(a, b, "estimate_flow");
  nn::require_rank(a, 3, "estimate_flow");
  return nn::Tensor({2, a.dim(1), a.dim(2)});
}

BlockMatchFlow::BlockMatchFlow(BlockMatchConfig config) : config_(config) {
  if (config_.levels < 1 || config_.search_radius < 0 || config_.refine_radius < 0 ||
      config_.patch_radius < 0) {
    throw ConfigError("block matching parameters must be nonnegative with at least one level");
  }
}

nn::Tensor BlockMatchFlow::estimate(const nn::Tensor& a, const nn::Tensor& b) const {
  nn::require_same_shape(a, b, "estimate_flow");
  nn::require_rank(a, 3, "estimate_flow");
  std::vector<Plane> pa{to_plane(a)}, pb{to_plane(b)};
  while (static_cast<int>(pa.size()) < config_.levels &&
         std::min(pa.back().height, pa.back().width) >= 8) {
    pa.push_back(downsample(pa.back()));
    pb.push_back(downsample(pb.back()));
  }
  Field field;
  bool have_coarse = false;
  for (int level = static_cast<int>(pa.size()) - 1; level >= 0; --level) {
    const int radius = have_coarse ? config_.refine_radius : config_.search_radius;
    field = match_level(pa[level], pb[level], have_coarse ? &field : nullptr, radius,
                        config_.patch_radius);
    have_coarse = true;
  }
  nn::Tensor flow({2, a.dim(1), a.dim(2)});
  const std::size_t plane = field.dx.size();
  for (std::size_t i = 0; i < plane; ++i) {
    flow[i] = field.dx[i];
    flow[plane + i] = field.dy[i];
  }
  return flow;
}

std::shared_ptr<const FlowEstimator> make_flow_estimator(const std::string& name) {
  if (name == "zero") return std::make_shared<ZeroFlow>();
  if (name == "block_matching") return std::make_shared<BlockMatchFlow>();
  throw ConfigError("unknown flow estimator '" + name + "' (expected zero or block_matching)");
}

}  // namespace asf::net
