#include "asf/metrics/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace asf::metrics {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

void require_frame_pair(const nn::Tensor& a, const nn::Tensor& b, const char* what) {
  nn::require_same_shape(a, b, what);
  nn::require_rank(a, 3, what);
  if (a.dim(0) != 3) throw ShapeMismatchError(std::string(what) + " expects RGB frames, got " + a.shape_string());
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

struct Plane {
  int height = 0, width = 0;
  std::vector<double> v;
  double at(int y, int x) const {
    return v[static_cast<std::size_t>(std::clamp(y, 0, height - 1)) * width + std::clamp(x, 0, width - 1)];
  }
};

Plane half(const Plane& p) {
  Plane out{std::max(1, p.height / 2), std::max(1, p.width / 2), {}};
  out.v.resize(static_cast<std::size_t>(out.height) * out.width);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.v[static_cast<std::size_t>(y) * out.width + x] =
          0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) + p.at(2 * y + 1, 2 * x + 1));
    }
  }
  return out;
}

std::vector<double> gradient_magnitude(const Plane& p) {
  std::vector<double> g(p.v.size());
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double gx = 0.5 * (p.at(y, x + 1) - p.at(y, x - 1));
      const double gy = 0.5 * (p.at(y + 1, x) - p.at(y - 1, x));
      g[static_cast<std::size_t>(y) * p.width + x] = std::hypot(gx, gy);
    }
  }
  return g;
}

}  // namespace

std::vector<double> luminance_255(const nn::Tensor& rgb) {
  const auto r = rgb.channel(0), g = rgb.channel(1), b = rgb.channel(2);
  std::vector<double> y(r.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 255.0 * (0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]);
  return y;
}

double psnr_y(const nn::Tensor& pred, const nn::Tensor& gt) {
  require_frame_pair(pred, gt, "psnr_y");
  const auto a = luminance_255(pred), b = luminance_255(gt);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double ssim(const nn::Tensor& pred, const nn::Tensor& gt) {
  require_frame_pair(pred, gt, "ssim");
  const int h = pred.dim(1), w = pred.dim(2);
  if (h < kWindow || w < kWindow) {
    throw PreconditionError("ssim needs frames of at least 11 x 11, got " + pred.shape_string());
  }
  const auto a = luminance_255(pred), b = luminance_255(gt);
  static const auto g = gaussian_taps();
  double total = 0.0;
  for (int y = 0; y + kWindow <= h; ++y) {
    for (int x = 0; x + kWindow <= w; ++x) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int j = 0; j < kWindow; ++j) {
        for (int i = 0; i < kWindow; ++i) {
          const std::size_t k = static_cast<std::size_t>(y + j) * w + x + i;
          const double wt = g[j] * g[i];
          mu_a += wt * a[k];
          mu_b += wt * b[k];
        }
      }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int j = 0; j < kWindow; ++j) {
        for (int i = 0; i < kWindow; ++i) {
          const std::size_t k = static_cast<std::size_t>(y + j) * w + x + i;
          const double wt = g[j] * g[i];
          const double da = a[k] - mu_a, db = b[k] - mu_b;
          var_a += wt * da * da;
          var_b += wt * db * db;
          cov += wt * da * db;
        }
      }
      total += ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
    }
  }
  return total / static_cast<double>((h - kWindow + 1) * (w - kWindow + 1));
}

double gradient_distance(const nn::Tensor& a, const nn::Tensor& b) {
  require_frame_pair(a, b, "gradient_distance");
  const int h = a.dim(1), w = a.dim(2);
  auto luma = [&](const nn::Tensor& t) {
    Plane p{h, w, luminance_255(t)};
    for (double& v : p.v) v /= 255.0;
    return p;
  };
  Plane pa = luma(a), pb = luma(b);
  constexpr int kScales = 3;
  double total = 0.0;
  for (int s = 0; s < kScales; ++s) {
    const auto ga = gradient_magnitude(pa), gb = gradient_magnitude(pb);
    double d = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) d += std::abs(ga[i] - gb[i]);
    total += d / static_cast<double>(ga.size());
    if (s + 1 < kScales) {
      pa = half(pa);
      pb = half(pb);
    }
  }
  return total / kScales;
}

double tlp(const data::VideoClip& restored, const data::VideoClip& gt, const Distance& dist) {
  if (!data::same_geometry(restored, gt)) throw ShapeMismatchError("tlp: clips differ in (T, H, W)");
  if (restored.length() < 2) throw PreconditionError("tlp needs at least two frames");
  double total = 0.0;
  for (int t = 0; t + 1 < restored.length(); ++t) {
    total += std::abs(dist(restored.frames[t], restored.frames[t + 1]) - dist(gt.frames[t], gt.frames[t + 1]));
  }
  return total / (restored.length() - 1);
}

double psnr_y(const data::VideoClip& pred, const data::VideoClip& gt) {
  if (!data::same_geometry(pred, gt) || pred.frames.empty()) throw ShapeMismatchError("psnr_y: clips differ");
  double s = 0.0;
  for (int t = 0; t < pred.length(); ++t) s += psnr_y(pred.frames[t], gt.frames[t]);
  return s / pred.length();
}

double ssim(const data::VideoClip& pred, const data::VideoClip& gt) {
  if (!data::same_geometry(pred, gt) || pred.frames.empty()) throw ShapeMismatchError("ssim: clips differ");
  double s = 0.0;
  for (int t = 0; t < pred.length(); ++t) s += ssim(pred.frames[t], gt.frames[t]);
  return s / pred.length();
}

ClipMetrics measure(const std::string& id, const data::VideoClip& restored, const data::VideoClip& gt,
                    const Distance& dist) {
  ClipMetrics m;
  m.id = id;
  m.psnr_y = psnr_y(restored, gt);
  m.ssim = ssim(restored, gt);
  m.tlp = restored.length() >= 2 ? tlp(restored, gt, dist) : 0.0;
  return m;
}

ClipMetrics mean_of(const std::vector<ClipMetrics>& clips) {
  ClipMetrics m;
  m.id = "mean";
  if (clips.empty()) return m;
  for (const auto& c : clips) {
    m.psnr_y += c.psnr_y;
    m.ssim += c.ssim;
    m.tlp += c.tlp;
  }
  const auto n = static_cast<double>(clips.size());
  m.psnr_y /= n;
  m.ssim /= n;
  m.tlp /= n;
  return m;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& c : report.clips) {
    clips.push_back({{"id", c.id}, {"psnr_y", c.psnr_y}, {"ssim", c.ssim}, {"tlp", c.tlp}});
  }
  return {{"clips", clips},
          {"means", {{"psnr_y", report.means.psnr_y}, {"ssim", report.means.ssim}, {"tlp", report.means.tlp}}},
          {"meta", report.meta}};
}

MetricsReport evaluate(const Restorer& restore, const data::Manifest& test, nlohmann::json meta, const Distance& dist,
                       const std::string& dist_name) {
  const auto pairs = data::paired_entries(test);
  for (const auto& e : test.entries) {
    // Streak layers ride along in synthesized test sets and are not scored.
    if (e.role != data::Role::rainy && e.role != data::Role::clean && e.role != data::Role::streak) {
      throw data::ManifestError("evaluation clip '" + e.clip_id + "' is not rainy, clean or streak");
    }
  }
  MetricsReport report;
  report.meta = meta.is_object() ? std::move(meta) : nlohmann::json::object();
  report.meta["tlp_distance"] = dist_name;
  for (const auto& pair : pairs) {
    const data::VideoClip rainy = data::load_clip(test.resolve(*pair.rainy), data::Role::rainy);
    const data::VideoClip clean = data::load_clip(test.resolve(*pair.clean), data::Role::clean);
    report.clips.push_back(measure(pair.group, restore(rainy), clean, dist));
  }
  report.means = mean_of(report.clips);
  return report;
}

}  // namespace asf::metrics
