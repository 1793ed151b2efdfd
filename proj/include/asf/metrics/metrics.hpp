#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asf/datastore/datastore.hpp"

namespace asf::metrics {

// BT.601 luminance on the 0-255 scale, H x W row-major.
std::vector<double> luminance_255(const nn::Tensor& rgb);

// 10 log10(255^2 / MSE) on luminance, capped at 100 dB.
double psnr_y(const nn::Tensor& pred, const nn::Tensor& gt);

// Mean SSIM over valid 11 x 11 Gaussian windows (sigma 1.5) of the
// luminance, C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2. Frames smaller than
// the window raise PreconditionError.
double ssim(const nn::Tensor& pred, const nn::Tensor& gt);

using Distance = std::function<double(const nn::Tensor&, const nn::Tensor&)>;

// Default perceptual stand-in: mean absolute difference of gradient-magnitude
// maps of the luminance, averaged over three dyadic scales.
double gradient_distance(const nn::Tensor& a, const nn::Tensor& b);
inline constexpr const char* kGradientDistanceName = "multiscale_gradient_l1";

// mean_t | dist(R_t, R_t+1) - dist(G_t, G_t+1) |, T >= 2.
double tlp(const data::VideoClip& restored, const data::VideoClip& gt, const Distance& dist = gradient_distance);

// Frame means over a clip.
double psnr_y(const data::VideoClip& pred, const data::VideoClip& gt);
double ssim(const data::VideoClip& pred, const data::VideoClip& gt);

struct ClipMetrics {
  std::string id;
  double psnr_y = 0.0;
  double ssim = 0.0;
  double tlp = 0.0;
};

ClipMetrics measure(const std::string& id, const data::VideoClip& restored, const data::VideoClip& gt,
                    const Distance& dist = gradient_distance);

struct MetricsReport {
  std::vector<ClipMetrics> clips;
  ClipMetrics means;
  nlohmann::json meta = nlohmann::json::object();
};

// Arithmetic means of the per-clip values.
ClipMetrics mean_of(const std::vector<ClipMetrics>& clips);

// {clips: [{id, psnr_y, ssim, tlp}], means: {psnr_y, ssim, tlp}, meta: {...}}
nlohmann::json to_json(const MetricsReport& report);

using Restorer = std::function<data::VideoClip(const data::VideoClip&)>;

// Restores every rainy clip of a paired test manifest and scores it against
// its clean partner. Unpaired clips raise ManifestError.
MetricsReport evaluate(const Restorer& restore, const data::Manifest& test, nlohmann::json meta = {},
                       const Distance& dist = gradient_distance, const std::string& dist_name = kGradientDistanceName);

}  // namespace asf::metrics
