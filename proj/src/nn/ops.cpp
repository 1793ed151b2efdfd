#include "asf/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include <Eigen/Core>

#include "asf/common/error.hpp"

namespace asf::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

template <typename Fn>
void if_grad(const Var& v, Fn&& fn) {
  if (v && v->requires_grad) fn(v->grad_buffer());
}

void im2col(const double* x, int channels, int height, int width, int kh, int kw, int dilation,
            Padding padding, double* cols) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    const double* src = x + c * plane;
    for (int i = 0; i < kh; ++i) {
      const int dy = (i - kh / 2) * dilation;
      for (int j = 0; j < kw; ++j) {
        const int dx = (j - kw / 2) * dilation;
        double* dst = cols + ((static_cast<std::size_t>(c) * kh + i) * kw + j) * plane;
        for (int y = 0; y < height; ++y) {
          int sy = y + dy;
          double* out = dst + static_cast<std::size_t>(y) * width;
          if (padding == Padding::zeros) {
            if (sy < 0 || sy >= height) {
              std::fill(out, out + width, 0.0);
              continue;
            }
            const int lo = std::clamp(-dx, 0, width);
            const int hi = std::clamp(width - dx, 0, width);
            std::fill(out, out + lo, 0.0);
            if (hi > lo) std::memcpy(out + lo, src + sy * width + lo + dx, sizeof(double) * (hi - lo));
            std::fill(out + std::max(hi, lo), out + width, 0.0);
          } else {
            sy = std::clamp(sy, 0, height - 1);
            const double* row = src + sy * width;
            for (int xx = 0; xx < width; ++xx) out[xx] = row[std::clamp(xx + dx, 0, width - 1)];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, int channels, int height, int width, int kh, int kw, int dilation,
            Padding padding, double* dx_out) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    double* dst = dx_out + c * plane;
    for (int i = 0; i < kh; ++i) {
      const int dy = (i - kh / 2) * dilation;
      for (int j = 0; j < kw; ++j) {
        const int dx = (j - kw / 2) * dilation;
        const double* src = cols + ((static_cast<std::size_t>(c) * kh + i) * kw + j) * plane;
        for (int y = 0; y < height; ++y) {
          int sy = y + dy;
          const double* in = src + static_cast<std::size_t>(y) * width;
          if (padding == Padding::zeros) {
            if (sy < 0 || sy >= height) continue;
            const int lo = std::clamp(-dx, 0, width);
            const int hi = std::clamp(width - dx, 0, width);
            double* row = dst + sy * width + dx;
            for (int xx = lo; xx < hi; ++xx) row[xx] += in[xx];
          } else {
            sy = std::clamp(sy, 0, height - 1);
            double* row = dst + sy * width;
            for (int xx = 0; xx < width; ++xx) row[std::clamp(xx + dx, 0, width - 1)] += in[xx];
          }
        }
      }
    }
  }
}

// One bilinear tap with replicated borders: four flat indices into a plane
// plus the fractional weights.
struct Tap {
  int i00, i01, i10, i11;
  double fx, fy;

  double sample(const double* plane) const {
    return (1.0 - fy) * ((1.0 - fx) * plane[i00] + fx * plane[i01]) +
           fy * ((1.0 - fx) * plane[i10] + fx * plane[i11]);
  }
  double d_dx(const double* plane) const {
    return (1.0 - fy) * (plane[i01] - plane[i00]) + fy * (plane[i11] - plane[i10]);
  }
  double d_dy(const double* plane) const {
    return (1.0 - fx) * (plane[i10] - plane[i00]) + fx * (plane[i11] - plane[i01]);
  }
  void scatter(double* plane, double g) const {
    plane[i00] += g * (1.0 - fy) * (1.0 - fx);
    plane[i01] += g * (1.0 - fy) * fx;
    plane[i10] += g * fy * (1.0 - fx);
    plane[i11] += g * fy * fx;
  }
};

Tap make_tap(double sx, double sy, int height, int width) {
  if (!std::isfinite(sx) || !std::isfinite(sy)) {
    throw PreconditionError("bilinear sampling position is not finite");
  }
  // Beyond one pixel outside the frame every tap clamps to the border, so
  // limiting the range changes neither the value nor the derivative.
  sx = std::clamp(sx, -1.0, static_cast<double>(width));
  sy = std::clamp(sy, -1.0, static_cast<double>(height));
  const double x0f = std::floor(sx);
  const double y0f = std::floor(sy);
  const int x0 = static_cast<int>(x0f);
  const int y0 = static_cast<int>(y0f);
  const int cx0 = std::clamp(x0, 0, width - 1);
  const int cx1 = std::clamp(x0 + 1, 0, width - 1);
  const int cy0 = std::clamp(y0, 0, height - 1);
  const int cy1 = std::clamp(y0 + 1, 0, height - 1);
  return Tap{cy0 * width + cx0, cy0 * width + cx1, cy1 * width + cx0, cy1 * width + cx1,
             sx - x0f, sy - y0f};
}

void check_conv_args(const Tensor& x, const Tensor& w, const Var& bias, const char* what) {
  require_rank(x, 3, what);
  require_rank(w, 4, what);
  if (w.dim(1) != x.dim(0)) {
    throw ShapeMismatchError(std::string(what) + ": weight " + w.shape_string() +
                             " does not match input " + x.shape_string());
  }
  if (w.dim(2) % 2 == 0 || w.dim(3) % 2 == 0) {
    throw ShapeMismatchError(std::string(what) + ": kernel sizes must be odd, got " +
                             w.shape_string());
  }
  if (bias && (bias->value.numel() != static_cast<std::size_t>(w.dim(0)))) {
    throw ShapeMismatchError(std::string(what) + ": bias has " +
                             std::to_string(bias->value.numel()) + " entries for " +
                             std::to_string(w.dim(0)) + " outputs");
  }
}

void add_bias(Tensor& out, const Var& bias) {
  if (!bias) return;
  const std::size_t plane = out.numel() / out.dim(0);
  for (int o = 0; o < out.dim(0); ++o) {
    double* row = out.data() + o * plane;
    const double b = bias->value[o];
    for (std::size_t i = 0; i < plane; ++i) row[i] += b;
  }
}

void accumulate_bias_grad(const Var& bias, const Tensor& g) {
  if_grad(bias, [&](Tensor& db) {
    const std::size_t plane = g.numel() / g.dim(0);
    for (int o = 0; o < g.dim(0); ++o) {
      const double* row = g.data() + o * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += row[i];
      db[o] += s;
    }
  });
}

template <typename Fwd, typename Bwd>
Var unary(const Var& x, Fwd fwd, Bwd bwd) {
  Tensor out = Tensor::zeros_like(x->value);
  const double* in = x->value.data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(in[i]);
  auto result = make_result(std::move(out), {x}, nullptr);
  if (result->requires_grad) {
    Node* self = result.get();
    result->backward_fn = [x, self, bwd](const Tensor& g) {
      Tensor& dx = x->grad_buffer();
      const double* in = x->value.data();
      const double* out = self->value.data();
      for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * bwd(in[i], out[i]);
    };
  }
  return result;
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options) {
  const Tensor& xv = x->value;
  const Tensor& wv = weight->value;
  check_conv_args(xv, wv, bias, "conv2d");
  const int channels = xv.dim(0), height = xv.dim(1), width = xv.dim(2);
  const int outs = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const int rows = channels * kh * kw;
  const int pixels = height * width;
  const bool pointwise = kh == 1 && kw == 1;

  auto cols = std::make_shared<Tensor>();
  if (!pointwise) {
    *cols = Tensor::uninitialized({rows, pixels});
    im2col(xv.data(), channels, height, width, kh, kw, options.dilation, options.padding,
           cols->data());
  }
  const double* col_data = pointwise ? xv.data() : cols->data();

  Tensor out = Tensor::uninitialized({outs, height, width});
  MutMap(out.data(), outs, pixels).noalias() =
      ConstMap(wv.data(), outs, rows) * ConstMap(col_data, rows, pixels);
  add_bias(out, bias);

  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents),
                     [x, weight, bias, cols, options, channels, height, width, outs, kh, kw, rows,
                      pixels, pointwise](const Tensor& g) {
                       const double* col_data = pointwise ? x->value.data() : cols->data();
                       ConstMap gm(g.data(), outs, pixels);
                       if_grad(weight, [&](Tensor& dw) {
                         MutMap(dw.data(), outs, rows).noalias() +=
                             gm * ConstMap(col_data, rows, pixels).transpose();
                       });
                       accumulate_bias_grad(bias, g);
                       if_grad(x, [&](Tensor& dx) {
                         const ConstMap wm(weight->value.data(), outs, rows);
                         if (pointwise) {
                           MutMap(dx.data(), rows, pixels).noalias() += wm.transpose() * gm;
                           return;
                         }
                         RowMat dcols = wm.transpose() * gm;
                         col2im(dcols.data(), channels, height, width, kh, kw, options.dilation,
                                options.padding, dx.data());
                       });
                     });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double in, double) { return (in >= lo && in <= hi) ? 1.0 : 0.0; });
}

Var scale(const Var& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  out += b->value;
  return make_result(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if_grad(a, [&](Tensor& da) { da += g; });
    if_grad(b, [&](Tensor& db) { db += g; });
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "sub");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_result(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if_grad(a, [&](Tensor& da) { da += g; });
    if_grad(b, [&](Tensor& db) {
      for (std::size_t i = 0; i < g.numel(); ++i) db[i] -= g[i];
    });
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
  return make_result(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if_grad(a, [&](Tensor& da) {
      for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * b->value[i];
    });
    if_grad(b, [&](Tensor& db) {
      for (std::size_t i = 0; i < g.numel(); ++i) db[i] += g[i] * a->value[i];
    });
  });
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw PreconditionError("concat_channels: no inputs");
  const Tensor& first = parts.front()->value;
  require_rank(first, 3, "concat_channels");
  int channels = 0;
  for (const auto& p : parts) {
    require_rank(p->value, 3, "concat_channels");
    if (p->value.dim(1) != first.dim(1) || p->value.dim(2) != first.dim(2)) {
      throw ShapeMismatchError("concat_channels: spatial sizes " + first.shape_string() + " and " +
                               p->value.shape_string() + " differ");
    }
    channels += p->value.dim(0);
  }
  Tensor out({channels, first.dim(1), first.dim(2)});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.numel(), out.data() + offset);
    offset += p->value.numel();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return make_result(std::move(out), parents, [parents](const Tensor& g) {
    std::size_t offset = 0;
    for (const auto& p : parents) {
      const std::size_t n = p->value.numel();
      if_grad(p, [&](Tensor& dp) {
        for (std::size_t i = 0; i < n; ++i) dp[i] += g[offset + i];
      });
      offset += n;
    }
  });
}

Var slice_channels(const Var& x, int begin, int end) {
  require_rank(x->value, 3, "slice_channels");
  if (begin < 0 || end > x->value.dim(0) || begin > end) {
    throw ShapeMismatchError("slice_channels: range [" + std::to_string(begin) + ", " +
                             std::to_string(end) + ") outside " + x->value.shape_string());
  }
  const std::size_t plane = static_cast<std::size_t>(x->value.dim(1)) * x->value.dim(2);
  Tensor out({end - begin, x->value.dim(1), x->value.dim(2)});
  std::copy(x->value.data() + begin * plane, x->value.data() + end * plane, out.data());
  return make_result(std::move(out), {x}, [x, begin, plane](const Tensor& g) {
    Tensor& dx = x->grad_buffer();
    double* dst = dx.data() + begin * plane;
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
  });
}

Var repeat_channels(const Var& x, int times) {
  std::vector<Var> copies(static_cast<std::size_t>(times), x);
  return concat_channels(copies);
}

Var global_avg_pool(const Var& x) {
  require_rank(x->value, 3, "global_avg_pool");
  const int channels = x->value.dim(0);
  const std::size_t plane = x->value.numel() / channels;
  Tensor out({channels, 1, 1});
  for (int c = 0; c < channels; ++c) {
    double s = 0.0;
    for (double v : x->value.channel(c)) s += v;
    out[c] = s / static_cast<double>(plane);
  }
  return make_result(std::move(out), {x}, [x, channels, plane](const Tensor& g) {
    Tensor& dx = x->grad_buffer();
    for (int c = 0; c < channels; ++c) {
      const double share = g[c] / static_cast<double>(plane);
      for (double& v : dx.channel(c)) v += share;
    }
  });
}

Var mul_channels(const Var& x, const Var& gate) {
  require_rank(x->value, 3, "mul_channels");
  const int channels = x->value.dim(0);
  if (gate->value.numel() != static_cast<std::size_t>(channels)) {
    throw ShapeMismatchError("mul_channels: gate " + gate->value.shape_string() +
                             " does not match " + x->value.shape_string());
  }
  Tensor out = x->value;
  for (int c = 0; c < channels; ++c) {
    for (double& v : out.channel(c)) v *= gate->value[c];
  }
  return make_result(std::move(out), {x, gate}, [x, gate, channels](const Tensor& g) {
    if_grad(x, [&](Tensor& dx) {
      for (int c = 0; c < channels; ++c) {
        auto gc = g.channel(c);
        auto dc = dx.channel(c);
        for (std::size_t i = 0; i < gc.size(); ++i) dc[i] += gc[i] * gate->value[c];
      }
    });
    if_grad(gate, [&](Tensor& dg) {
      for (int c = 0; c < channels; ++c) {
        auto gc = g.channel(c);
        auto xc = x->value.channel(c);
        double s = 0.0;
        for (std::size_t i = 0; i < gc.size(); ++i) s += gc[i] * xc[i];
        dg[c] += s;
      }
    });
  });
}

Var mean_abs_error(const Var& pred, const Var& target) {
  require_same_shape(pred->value, target->value, "mean_abs_error");
  const std::size_t n = pred->value.numel();
  if (n == 0) throw PreconditionError("mean_abs_error: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(pred->value[i] - target->value[i]);
  Tensor out({1}, s / static_cast<double>(n));
  return make_result(std::move(out), {pred, target}, [pred, target, n](const Tensor& g) {
    const double share = g[0] / static_cast<double>(n);
    auto sign = [&](std::size_t i) {
      const double d = pred->value[i] - target->value[i];
      return d > 0.0 ? share : (d < 0.0 ? -share : 0.0);
    };
    if_grad(pred, [&](Tensor& dp) {
      for (std::size_t i = 0; i < n; ++i) dp[i] += sign(i);
    });
    if_grad(target, [&](Tensor& dt) {
      for (std::size_t i = 0; i < n; ++i) dt[i] -= sign(i);
    });
  });
}

Var bilinear_sample(const Var& feature, const Var& coords) {
  const Tensor& f = feature->value;
  const Tensor& xy = coords->value;
  require_rank(f, 3, "bilinear_sample");
  require_rank(xy, 3, "bilinear_sample");
  if (xy.dim(0) != 2) {
    throw ShapeMismatchError("bilinear_sample: coords must be 2 x H x W, got " + xy.shape_string());
  }
  const int channels = f.dim(0), height = f.dim(1), width = f.dim(2);
  const int out_h = xy.dim(1), out_w = xy.dim(2);
  const std::size_t in_plane = static_cast<std::size_t>(height) * width;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;

  auto taps = std::make_shared<std::vector<Tap>>(out_plane);
  for (std::size_t p = 0; p < out_plane; ++p) {
    (*taps)[p] = make_tap(xy[p], xy[out_plane + p], height, width);
  }
  Tensor out({channels, out_h, out_w});
  for (int c = 0; c < channels; ++c) {
    const double* plane = f.data() + c * in_plane;
    double* dst = out.data() + c * out_plane;
    for (std::size_t p = 0; p < out_plane; ++p) dst[p] = (*taps)[p].sample(plane);
  }
  return make_result(
      std::move(out), {feature, coords},
      [feature, coords, taps, channels, in_plane, out_plane](const Tensor& g) {
        if_grad(feature, [&](Tensor& df) {
          for (int c = 0; c < channels; ++c) {
            double* plane = df.data() + c * in_plane;
            const double* gc = g.data() + c * out_plane;
            for (std::size_t p = 0; p < out_plane; ++p) (*taps)[p].scatter(plane, gc[p]);
          }
        });
        if_grad(coords, [&](Tensor& dxy) {
          for (int c = 0; c < channels; ++c) {
            const double* plane = feature->value.data() + c * in_plane;
            const double* gc = g.data() + c * out_plane;
            for (std::size_t p = 0; p < out_plane; ++p) {
              dxy[p] += gc[p] * (*taps)[p].d_dx(plane);
              dxy[out_plane + p] += gc[p] * (*taps)[p].d_dy(plane);
            }
          }
        });
      });
}

Var warp(const Var& feature, const Var& flow) {
  require_rank(feature->value, 3, "warp");
  require_rank(flow->value, 3, "warp");
  const int height = feature->value.dim(1), width = feature->value.dim(2);
  if (flow->value.dim(0) != 2 || flow->value.dim(1) != height || flow->value.dim(2) != width) {
    throw ShapeMismatchError("warp: flow " + flow->value.shape_string() + " does not match feature " +
                             feature->value.shape_string());
  }
  return bilinear_sample(feature, add(constant(identity_grid(height, width)), flow));
}

Var deform_conv2d(const Var& x, const Var& offsets, const Var& weight, const Var& bias) {
  const Tensor& xv = x->value;
  const Tensor& wv = weight->value;
  const Tensor& ov = offsets->value;
  check_conv_args(xv, wv, bias, "deform_conv2d");
  const int channels = xv.dim(0), height = xv.dim(1), width = xv.dim(2);
  const int outs = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const int taps_per_pixel = kh * kw;
  require_rank(ov, 3, "deform_conv2d");
  if (ov.dim(0) != 2 * taps_per_pixel || ov.dim(1) != height || ov.dim(2) != width) {
    throw ShapeMismatchError("deform_conv2d: offsets " + ov.shape_string() + " do not match " +
                             std::to_string(2 * taps_per_pixel) + " x " + std::to_string(height) +
                             " x " + std::to_string(width));
  }
  const int rows = channels * taps_per_pixel;
  const std::size_t plane = static_cast<std::size_t>(height) * width;

  auto taps = std::make_shared<std::vector<Tap>>(taps_per_pixel * plane);
  for (int k = 0; k < taps_per_pixel; ++k) {
    const int ky = k / kw - kh / 2;
    const int kx = k % kw - kw / 2;
    const double* odx = ov.data() + (2 * k) * plane;
    const double* ody = ov.data() + (2 * k + 1) * plane;
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) {
        const std::size_t p = static_cast<std::size_t>(y) * width + xx;
        (*taps)[k * plane + p] = make_tap(xx + kx + odx[p], y + ky + ody[p], height, width);
      }
    }
  }
  auto cols = std::make_shared<Tensor>(Tensor::uninitialized({rows, static_cast<int>(plane)}));
  for (int c = 0; c < channels; ++c) {
    const double* src = xv.data() + c * plane;
    for (int k = 0; k < taps_per_pixel; ++k) {
      double* dst = cols->data() + (static_cast<std::size_t>(c) * taps_per_pixel + k) * plane;
      const Tap* tk = taps->data() + k * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = tk[p].sample(src);
    }
  }
  Tensor out = Tensor::uninitialized({outs, height, width});
  MutMap(out.data(), outs, static_cast<Eigen::Index>(plane)).noalias() =
      ConstMap(wv.data(), outs, rows) * ConstMap(cols->data(), rows, static_cast<Eigen::Index>(plane));
  add_bias(out, bias);

  std::vector<Var> parents{x, offsets, weight};
  if (bias) parents.push_back(bias);
  return make_result(
      std::move(out), std::move(parents),
      [x, offsets, weight, bias, taps, cols, channels, outs, rows, taps_per_pixel,
       plane](const Tensor& g) {
        const auto pixels = static_cast<Eigen::Index>(plane);
        ConstMap gm(g.data(), outs, pixels);
        if_grad(weight, [&](Tensor& dw) {
          MutMap(dw.data(), outs, rows).noalias() +=
              gm * ConstMap(cols->data(), rows, pixels).transpose();
        });
        accumulate_bias_grad(bias, g);
        if (!x->requires_grad && !offsets->requires_grad) return;
        const RowMat dcols = ConstMap(weight->value.data(), outs, rows).transpose() * gm;
        if_grad(x, [&](Tensor& dx) {
          for (int c = 0; c < channels; ++c) {
            double* dst = dx.data() + c * plane;
            for (int k = 0; k < taps_per_pixel; ++k) {
              const double* gc = dcols.data() + (static_cast<std::size_t>(c) * taps_per_pixel + k) * plane;
              const Tap* tk = taps->data() + k * plane;
              for (std::size_t p = 0; p < plane; ++p) tk[p].scatter(dst, gc[p]);
            }
          }
        });
        if_grad(offsets, [&](Tensor& doff) {
          for (int c = 0; c < channels; ++c) {
            const double* src = x->value.data() + c * plane;
            for (int k = 0; k < taps_per_pixel; ++k) {
              const double* gc = dcols.data() + (static_cast<std::size_t>(c) * taps_per_pixel + k) * plane;
              const Tap* tk = taps->data() + k * plane;
              double* ddx = doff.data() + (2 * k) * plane;
              double* ddy = doff.data() + (2 * k + 1) * plane;
              for (std::size_t p = 0; p < plane; ++p) {
                ddx[p] += gc[p] * tk[p].d_dx(src);
                ddy[p] += gc[p] * tk[p].d_dy(src);
              }
            }
          }
        });
      });
}

Var channel_attention(const Var& x, const ChannelAttentionParams& params) {
  const Var pooled = global_avg_pool(x);
  const Var hidden = relu(conv2d(pooled, params.squeeze_weight, params.squeeze_bias));
  const Var gate = sigmoid(conv2d(hidden, params.excite_weight, params.excite_bias));
  return mul_channels(x, gate);
}

}  // namespace asf::nn
