#include <doctest.h>

#include "asf/nn/ops.hpp"
#include "asf/nn/params.hpp"
#include "support.hpp"

using namespace asf;
using namespace asf::nn;
using asf::testing::check_gradient;
using asf::testing::probe_loss;
using asf::testing::random_tensor;

namespace {

// Direct 2-D convolution oracle with stride 1, "same" output and either zero
// or clamp-to-edge padding.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int dilation, bool replicate) {
  const int c_in = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  Tensor out({c_out, h, wd});
  for (int o = 0; o < c_out; ++o) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < wd; ++xx) {
        double s = b.empty() ? 0.0 : b[o];
        for (int c = 0; c < c_in; ++c) {
          for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
              int sy = y + (i - kh / 2) * dilation, sx = xx + (j - kw / 2) * dilation;
              if (replicate) {
                sy = std::clamp(sy, 0, h - 1);
                sx = std::clamp(sx, 0, wd - 1);
              } else if (sy < 0 || sy >= h || sx < 0 || sx >= wd) {
                continue;
              }
              s += w[((static_cast<std::size_t>(o) * c_in + c) * kh + i) * kw + j] * x.at(c, sy, sx);
            }
          }
        }
        out.at(o, y, xx) = s;
      }
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("nnops") {
  TEST_CASE("bilinear_sample at the identity grid returns the input") {
    Rng rng(1);
    const Tensor f = random_tensor({3, 5, 7}, rng);
    const Var out = bilinear_sample(constant(f), constant(identity_grid(5, 7)));
    CHECK(out->value == f);
  }

  TEST_CASE("bilinear ramp sampled half a pixel right replicates the last value") {
    const Tensor ramp({1, 1, 4}, std::vector<double>{0, 1, 2, 3});
    Tensor coords = identity_grid(1, 4);
    for (int x = 0; x < 4; ++x) coords.at(0, 0, x) += 0.5;
    const Var out = bilinear_sample(constant(ramp), constant(coords));
    CHECK(out->value[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out->value[1] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(out->value[2] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(out->value[3] == doctest::Approx(3.0).epsilon(1e-15));
  }

  TEST_CASE("bilinear sampling of a constant feature is that constant anywhere") {
    Rng rng(2);
    const Tensor f({2, 4, 4}, 0.37);
    const Tensor coords = random_tensor({2, 6, 3}, rng, -10.0, 10.0);
    const Var out = bilinear_sample(constant(f), constant(coords));
    for (double v : out->value.values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
  }

  TEST_CASE("bilinear_sample rejects malformed coordinates") {
    const Tensor f({1, 4, 4});
    CHECK_THROWS_AS(bilinear_sample(constant(f), constant(Tensor({3, 4, 4}))), ShapeMismatchError);
    Tensor bad = identity_grid(4, 4);
    bad[0] = std::nan("");
    CHECK_THROWS_AS(bilinear_sample(constant(f), constant(bad)), PreconditionError);
  }

  TEST_CASE("warp with zero flow is the identity") {
    Rng rng(3);
    const Tensor f = random_tensor({4, 6, 5}, rng);
    CHECK(warp(constant(f), constant(Tensor({2, 6, 5})))->value == f);
  }

  TEST_CASE("warp by a uniform integer flow shifts a ramp by one column") {
    Tensor ramp({1, 3, 6});
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 6; ++x) ramp.at(0, y, x) = 10 * y + x;
    Tensor flow({2, 3, 6});
    for (int i = 0; i < 18; ++i) flow[i] = 1.0;
    const Var out = warp(constant(ramp), constant(flow));
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x + 1 < 6; ++x) CHECK(out->value.at(0, y, x) == ramp.at(0, y, x + 1));
  }

  TEST_CASE("warp rejects a flow of the wrong size") {
    CHECK_THROWS_AS(warp(constant(Tensor({1, 4, 4})), constant(Tensor({2, 4, 5}))), ShapeMismatchError);
  }

  TEST_CASE("warp gradients match central differences") {
    Rng rng(4);
    const Var feature = parameter(random_tensor({2, 6, 6}, rng));
    const Var flow = parameter(random_tensor({2, 6, 6}, rng, -1.7, 1.7));
    const Tensor weights = random_tensor({2, 6, 6}, rng);
    auto loss = [&] { return probe_loss(warp(feature, flow), weights); };
    CHECK(check_gradient(loss, flow, 72, 5).rel_error < 1e-4);
    CHECK(check_gradient(loss, feature, 72, 6).rel_error < 1e-4);
  }

  TEST_CASE("conv2d matches the direct oracle for zero and replicate padding with dilation") {
    Rng rng(7);
    const Tensor x = random_tensor({3, 7, 6}, rng);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng);
    const Tensor b = random_tensor({4}, rng);
    for (int dilation : {1, 2}) {
      for (Padding pad : {Padding::zeros, Padding::replicate}) {
        const Var out = conv2d(constant(x), constant(w), constant(b), {dilation, pad});
        CHECK(max_abs_diff(out->value, naive_conv(x, w, b, dilation, pad == Padding::replicate)) < 1e-12);
      }
    }
  }

  TEST_CASE("conv2d gradients match central differences") {
    Rng rng(8);
    const Var x = parameter(random_tensor({2, 5, 5}, rng));
    const Var w = parameter(random_tensor({3, 2, 3, 3}, rng));
    const Var b = parameter(random_tensor({3}, rng));
    const Tensor weights = random_tensor({3, 5, 5}, rng);
    auto loss = [&] { return probe_loss(conv2d(x, w, b, {2, Padding::zeros}), weights); };
    CHECK(check_gradient(loss, x, 50, 1).rel_error < 1e-6);
    CHECK(check_gradient(loss, w, 54, 2).rel_error < 1e-6);
    CHECK(check_gradient(loss, b, 3, 3).rel_error < 1e-6);
  }

  TEST_CASE("conv2d rejects mismatched weights") {
    CHECK_THROWS_AS(conv2d(constant(Tensor({2, 4, 4})), constant(Tensor({1, 3, 3, 3})), nullptr),
                    ShapeMismatchError);
    CHECK_THROWS_AS(conv2d(constant(Tensor({2, 4, 4})), constant(Tensor({1, 2, 2, 2})), nullptr),
                    ShapeMismatchError);
  }

  TEST_CASE("deform_conv2d with zero offsets equals dense convolution with edge replication") {
    Rng rng(9);
    const Tensor x = random_tensor({3, 7, 8}, rng);
    const Tensor w = random_tensor({5, 3, 3, 3}, rng);
    const Tensor b = random_tensor({5}, rng);
    const Var out = deform_conv2d(constant(x), constant(Tensor({18, 7, 8})), constant(w), constant(b));
    CHECK(max_abs_diff(out->value, naive_conv(x, w, b, 1, true)) < 1e-10);
  }

  TEST_CASE("deform_conv2d with a constant integer offset equals convolving the translated input") {
    Rng rng(10);
    const int h = 8, wd = 9;
    const Tensor x = random_tensor({2, h, wd}, rng);
    const Tensor w = random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    Tensor offsets({18, h, wd});
    for (int k = 0; k < 9; ++k)
      for (int p = 0; p < h * wd; ++p) offsets[static_cast<std::size_t>(2 * k) * h * wd + p] = 1.0;
    Tensor shifted({2, h, wd});
    for (int c = 0; c < 2; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) shifted.at(c, y, xx) = x.at(c, y, std::min(xx + 1, wd - 1));
    const Var out = deform_conv2d(constant(x), constant(offsets), constant(w), constant(b));
    const Tensor ref = naive_conv(shifted, w, b, 1, false);
    for (int o = 0; o < 3; ++o)
      for (int y = 1; y + 1 < h; ++y)
        for (int xx = 1; xx + 2 < wd; ++xx) CHECK(out->value.at(o, y, xx) == doctest::Approx(ref.at(o, y, xx)).epsilon(1e-12));
  }

  TEST_CASE("deform_conv2d gradients match central differences") {
    Rng rng(11);
    const Var x = parameter(random_tensor({1, 6, 6}, rng));
    const Var offsets = parameter(random_tensor({18, 6, 6}, rng, -1.4, 1.4));
    const Var w = parameter(random_tensor({2, 1, 3, 3}, rng));
    const Var b = parameter(random_tensor({2}, rng));
    const Tensor weights = random_tensor({2, 6, 6}, rng);
    auto loss = [&] { return probe_loss(deform_conv2d(x, offsets, w, b), weights); };
    CHECK(check_gradient(loss, x, 36, 1).rel_error < 1e-4);
    CHECK(check_gradient(loss, offsets, 200, 2).rel_error < 1e-4);
    CHECK(check_gradient(loss, w, 18, 3).rel_error < 1e-4);
  }

  TEST_CASE("deform_conv2d rejects offsets with the wrong tap count") {
    CHECK_THROWS_AS(deform_conv2d(constant(Tensor({1, 4, 4})), constant(Tensor({16, 4, 4})),
                                  constant(Tensor({1, 1, 3, 3})), nullptr),
                    ShapeMismatchError);
  }

  TEST_CASE("channel_attention gates each channel by a sigmoid of pooled statistics") {
    // Two channels, one hidden unit, hand-evaluated.
    const Tensor x({2, 1, 2}, std::vector<double>{1.0, 3.0, -2.0, 0.0});
    ChannelAttentionParams p{constant(Tensor({1, 2, 1, 1}, std::vector<double>{0.5, -0.25})),
                             constant(Tensor({1}, std::vector<double>{0.1})),
                             constant(Tensor({2, 1, 1, 1}, std::vector<double>{2.0, -1.0})),
                             constant(Tensor({2}, std::vector<double>{0.0, 0.3}))};
    const double hidden = std::max(0.0, 0.5 * 2.0 - 0.25 * -1.0 + 0.1);  // pooled means 2, -1
    const double g0 = 1.0 / (1.0 + std::exp(-(2.0 * hidden)));
    const double g1 = 1.0 / (1.0 + std::exp(-(-1.0 * hidden + 0.3)));
    const Var out = channel_attention(constant(x), p);
    CHECK(out->value[0] == doctest::Approx(1.0 * g0).epsilon(1e-14));
    CHECK(out->value[1] == doctest::Approx(3.0 * g0).epsilon(1e-14));
    CHECK(out->value[2] == doctest::Approx(-2.0 * g1).epsilon(1e-14));
    CHECK(out->value[3] == doctest::Approx(0.0).epsilon(1e-14));
  }

  TEST_CASE("channel_attention gradients match central differences") {
    Rng rng(12);
    const Var x = parameter(random_tensor({4, 5, 5}, rng));
    ChannelAttentionParams p{parameter(random_tensor({2, 4, 1, 1}, rng)), parameter(random_tensor({2}, rng)),
                             parameter(random_tensor({4, 2, 1, 1}, rng)), parameter(random_tensor({4}, rng))};
    const Tensor weights = random_tensor({4, 5, 5}, rng);
    auto loss = [&] { return probe_loss(channel_attention(x, p), weights); };
    CHECK(check_gradient(loss, x, 100, 1).rel_error < 1e-4);
    CHECK(check_gradient(loss, p.squeeze_weight, 8, 2).rel_error < 1e-4);
    CHECK(check_gradient(loss, p.excite_weight, 8, 3).rel_error < 1e-4);
    CHECK(check_gradient(loss, p.excite_bias, 4, 4).rel_error < 1e-4);
  }

  TEST_CASE("elementwise ops and channel plumbing have exact gradients") {
    Rng rng(13);
    const Var a = parameter(random_tensor({4, 3, 3}, rng, 0.1, 0.9));
    const Var b = parameter(random_tensor({4, 3, 3}, rng, 0.1, 0.9));
    const Tensor weights = random_tensor({8, 3, 3}, rng);
    auto loss = [&] {
      const Var parts[] = {mul(sigmoid(a), sub(b, a)), slice_channels(add(a, scale(b, 2.0)), 0, 4)};
      return probe_loss(concat_channels(parts), weights);
    };
    CHECK(check_gradient(loss, a, 36, 1).rel_error < 1e-7);
    CHECK(check_gradient(loss, b, 36, 2).rel_error < 1e-7);
  }

  TEST_CASE("graph recording is off under NoGradGuard") {
    const Var p = parameter(Tensor({1}, 2.0));
    {
      NoGradGuard guard;
      const Var y = mul(p, p);
      CHECK_FALSE(y->requires_grad);
      CHECK(y->parents.empty());
    }
    const Var y = mul(p, p);
    CHECK(y->requires_grad);
  }

  TEST_CASE("a node used twice accumulates both gradient paths") {
    const Var p = parameter(Tensor({1}, 3.0));
    const Var y = add(mul(p, p), p);  // y = p^2 + p, dy/dp = 2p + 1
    backward(y);
    CHECK(p->grad[0] == doctest::Approx(7.0));
  }

  TEST_CASE("mean_abs_error is the mean of absolute differences") {
    const Var a = constant(Tensor({1, 1, 4}, std::vector<double>{0.1, 0.5, 0.9, 0.0}));
    const Var b = constant(Tensor({1, 1, 4}, std::vector<double>{0.2, 0.5, 0.4, 0.3}));
    CHECK(mean_abs_error(a, b)->value[0] == doctest::Approx((0.1 + 0.0 + 0.5 + 0.3) / 4).epsilon(1e-15));
    CHECK(mean_abs_error(a, b)->value[0] == mean_abs_error(b, a)->value[0]);
  }

  TEST_CASE("ParamStore keeps registration order and checks assignments") {
    ParamStore store;
    Rng rng(1);
    store.add("b.weight", uniform_init({2, 3}, 3, 1.0, rng));
    store.add("a.bias", Tensor({2}));
    CHECK(store.entries().front().first == "b.weight");
    CHECK(store.scalar_count() == 8);
    CHECK_THROWS_AS(store.add("a.bias", Tensor({1})), PreconditionError);
    CHECK_THROWS_AS(store.assign("a.bias", Tensor({3})), ShapeMismatchError);
    for (double v : store.get("b.weight")->value.values()) CHECK(std::abs(v) <= 1.0);
  }
}
