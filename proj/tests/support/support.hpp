#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "asf/common/rng.hpp"
#include "asf/datastore/datastore.hpp"
#include "asf/nn/autograd.hpp"

namespace asf::testing {

inline nn::Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Weighted sum of the output with fixed random weights: a scalar whose
// gradient reaches every output element with a distinct coefficient.
inline nn::Var probe_loss(const nn::Var& out, const nn::Tensor& weights) {
  const nn::Tensor& v = out->value;
  double s = 0.0;
  for (std::size_t i = 0; i < v.numel(); ++i) s += weights[i] * v[i];
  return nn::make_result(nn::Tensor({1}, s), {out}, [out, weights](const nn::Tensor& g) {
    nn::Tensor& d = out->grad_buffer();
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g[0] * weights[i];
  });
}

struct GradCheck {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  int checked = 0;
};

// Central differences of loss() with respect to up to `samples` entries of
// `leaf`, compared with the reverse-mode gradient.
inline GradCheck check_gradient(const std::function<nn::Var()>& loss, const nn::Var& leaf, int samples,
                                std::uint64_t seed, double h = 1e-6) {
  leaf->zero_grad();
  nn::backward(loss());
  const nn::Tensor analytic = leaf->grad.empty() ? nn::Tensor::zeros_like(leaf->value) : leaf->grad;
  leaf->zero_grad();

  std::vector<std::size_t> index(leaf->value.numel());
  std::iota(index.begin(), index.end(), 0);
  Rng rng(seed);
  for (std::size_t i = index.size(); i > 1; --i) {
    std::swap(index[i - 1], index[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
  }
  if (static_cast<int>(index.size()) > samples) index.resize(static_cast<std::size_t>(samples));

  nn::NoGradGuard guard;
  double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
  for (std::size_t i : index) {
    const double saved = leaf->value[i];
    leaf->value[i] = saved + h;
    const double plus = loss()->value[0];
    leaf->value[i] = saved - h;
    const double minus = loss()->value[0];
    leaf->value[i] = saved;
    const double numeric = (plus - minus) / (2 * h);
    diff += (analytic[i] - numeric) * (analytic[i] - numeric);
    norm_a += analytic[i] * analytic[i];
    norm_n += numeric * numeric;
  }
  GradCheck r;
  r.checked = static_cast<int>(index.size());
  r.rel_error = std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12});
  return r;
}

// Fresh directory under the system temp dir, emptied first.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("asf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Textured 3 x H x W frame: smooth blobs plus fine sinusoids, translated by
// (dx, dy) so frame(p) = base(p - d).
inline nn::Tensor textured_frame(int height, int width, double dx, double dy, std::uint64_t seed = 1) {
  Rng rng(seed);
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 6; ++i) {
    waves.push_back({rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(0.0, 6.28), rng.uniform(0.05, 0.12)});
  }
  nn::Tensor f({3, height, width});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = 0.45 + 0.05 * c;
        for (const auto& w : waves) v += w.amp * std::sin(w.kx * (x - dx) + w.ky * (y - dy) + w.phase + c);
        f.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return f;
}

}  // namespace asf::testing
