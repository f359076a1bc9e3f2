#pragma once

// Central finite-difference oracle shared by the unit and acceptance suites.
// Independent of the backward implementations it checks: it only evaluates
// forward functions.

#include <algorithm>
#include <cmath>
#include <functional>

#include "tumorscope/ops.hpp"
#include "tumorscope/rng.hpp"
#include "tumorscope/tensor.hpp"

namespace tumorscope::testing {

inline constexpr double kFiniteDiffStep = 1e-5;

inline TensorD random_tensor(const Shape& shape, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  TensorD t(shape);
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

// d/dx of a scalar function by central differences, element by element.
inline TensorD numeric_gradient(const std::function<double(const TensorD&)>& f,
                                TensorD x, double h = kFiniteDiffStep) {
  TensorD g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|)
inline double max_relative_error(const TensorD& a, const TensorD& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0.0 ? diff : diff / scale;
}

inline double dot(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Keeps every element at least `margin` away from zero (ReLU kink).
inline void push_off_zero(TensorD& t, double margin, Rng& rng) {
  for (auto& v : t.vec()) {
    while (std::abs(v) < margin) v = rng.uniform(-1.0, 1.0);
  }
}

// Resamples until every 2x2 pooling window has a unique maximum with a gap
// larger than `margin`, so finite differences never flip the argmax.
inline void separate_pool_windows(TensorD& t, double margin, Rng& rng) {
  const std::size_t c_n = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t y = 0; y + 1 < h; y += 2) {
      for (std::size_t x = 0; x + 1 < w; x += 2) {
        for (;;) {
          double v[4] = {t.at(c, y, x), t.at(c, y, x + 1), t.at(c, y + 1, x),
                         t.at(c, y + 1, x + 1)};
          std::sort(v, v + 4);
          if (v[3] - v[2] > margin) break;
          t.at(c, y, x) = rng.uniform(-1, 1);
          t.at(c, y, x + 1) = rng.uniform(-1, 1);
          t.at(c, y + 1, x) = rng.uniform(-1, 1);
          t.at(c, y + 1, x + 1) = rng.uniform(-1, 1);
        }
      }
    }
  }
}

struct GradCheckStats {
  double max_rel_error = 0.0;
  int trials = 0;
};

// One randomized trial per op family; each returns the worst relative error
// across all differentiated arguments.
inline double check_conv2d_trial(Rng& rng) {
  const std::size_t c_in = 1 + rng.below(3), c_out = 1 + rng.below(3);
  const std::size_t k = 1 + rng.below(3);
  const std::size_t h = k + rng.below(4), w = k + rng.below(4);
  const TensorD x = random_tensor({c_in, h, w}, rng);
  const TensorD wt = random_tensor({c_out, c_in, k, k}, rng);
  const TensorD b = random_tensor({c_out}, rng);
  const TensorD up = random_tensor({c_out, h - k + 1, w - k + 1}, rng);
  const auto g = ops::conv2d_backward(x, wt, up);
  const auto fx = [&](const TensorD& v) { return dot(up, ops::conv2d(v, wt, b)); };
  const auto fw = [&](const TensorD& v) { return dot(up, ops::conv2d(x, v, b)); };
  const auto fb = [&](const TensorD& v) { return dot(up, ops::conv2d(x, wt, v)); };
  return std::max({max_relative_error(g.input, numeric_gradient(fx, x)),
                   max_relative_error(g.weights, numeric_gradient(fw, wt)),
                   max_relative_error(g.bias, numeric_gradient(fb, b))});
}

inline double check_dense_trial(Rng& rng) {
  const std::size_t n_in = 1 + rng.below(8), n_out = 1 + rng.below(8);
  const TensorD x = random_tensor({n_in}, rng);
  const TensorD wt = random_tensor({n_out, n_in}, rng);
  const TensorD b = random_tensor({n_out}, rng);
  const TensorD up = random_tensor({n_out}, rng);
  const auto g = ops::dense_backward(x, wt, up);
  const auto fx = [&](const TensorD& v) { return dot(up, ops::dense(v, wt, b)); };
  const auto fw = [&](const TensorD& v) { return dot(up, ops::dense(x, v, b)); };
  const auto fb = [&](const TensorD& v) { return dot(up, ops::dense(x, wt, v)); };
  return std::max({max_relative_error(g.input, numeric_gradient(fx, x)),
                   max_relative_error(g.weights, numeric_gradient(fw, wt)),
                   max_relative_error(g.bias, numeric_gradient(fb, b))});
}

inline double check_maxpool_trial(Rng& rng) {
  const std::size_t c = 1 + rng.below(3), h = 2 + rng.below(5), w = 2 + rng.below(5);
  TensorD x = random_tensor({c, h, w}, rng);
  separate_pool_windows(x, 1e-3, rng);
  const auto pooled = ops::maxpool2d(x);
  const TensorD up = random_tensor(pooled.output.shape(), rng);
  const TensorD g = ops::maxpool2d_backward(up, pooled.argmax, x.shape());
  const auto f = [&](const TensorD& v) { return dot(up, ops::maxpool2d(v).output); };
  return max_relative_error(g, numeric_gradient(f, x));
}

inline double check_relu_trial(Rng& rng) {
  TensorD x = random_tensor({1 + rng.below(20)}, rng);
  push_off_zero(x, 1e-3, rng);
  const TensorD up = random_tensor(x.shape(), rng);
  const TensorD g = ops::relu_backward(x, up);
  const auto f = [&](const TensorD& v) { return dot(up, ops::relu(v)); };
  return max_relative_error(g, numeric_gradient(f, x));
}

inline double check_sigmoid_trial(Rng& rng) {
  const TensorD x = random_tensor({1 + rng.below(20)}, rng, -6.0, 6.0);
  const TensorD up = random_tensor(x.shape(), rng);
  const TensorD g = ops::sigmoid_backward(x, up);
  const auto f = [&](const TensorD& v) { return dot(up, ops::sigmoid(v)); };
  return max_relative_error(g, numeric_gradient(f, x));
}

inline double check_bce_trial(Rng& rng) {
  const double z = rng.uniform(-8.0, 8.0);
  const int t = static_cast<int>(rng.below(2));
  const double analytic = ops::bce_loss(z, t).grad_logit;
  const double h = kFiniteDiffStep;
  const double numeric =
      (ops::bce_loss(z + h, t).loss - ops::bce_loss(z - h, t).loss) / (2.0 * h);
  return std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
}

}  // namespace tumorscope::testing
