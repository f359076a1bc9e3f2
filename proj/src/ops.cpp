#include "tumorscope/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

namespace tumorscope {

std::string shape_to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ConvDims {
  std::size_t c_in, h, w, c_out, k, h_out, w_out;
};

template <typename T>
ConvDims conv_dims(const Shape& input, const Tensor<T>& weights) {
  if (input.size() != 3) {
    throw ShapeError("conv2d: input must be [C,H,W], got " +
                     shape_to_string(input));
  }
  if (weights.ndim() != 4 || weights.dim(2) != weights.dim(3)) {
    throw ShapeError("conv2d: weights must be [C_out,C_in,K,K], got " +
                     shape_to_string(weights.shape()));
  }
  if (weights.dim(1) != input[0]) {
    throw ShapeError("conv2d: weights expect " + std::to_string(weights.dim(1)) +
                     " input channels, input has " + std::to_string(input[0]));
  }
  const std::size_t k = weights.dim(2);
  if (input[1] < k || input[2] < k) {
    throw ShapeError("conv2d: " + std::to_string(k) + "x" + std::to_string(k) +
                     " kernel larger than " + std::to_string(input[1]) + "x" +
                     std::to_string(input[2]) + " input");
  }
  return {input[0], input[1], input[2], weights.dim(0), k,
          input[1] - k + 1, input[2] - k + 1};
}

// Rows: (c, i, j) kernel taps; columns: output pixels.
template <typename T>
RowMat<T> im2col(const Tensor<T>& input, const ConvDims& d) {
  RowMat<T> cols(d.c_in * d.k * d.k, d.h_out * d.w_out);
  const T* src = input.data().data();
  for (std::size_t c = 0; c < d.c_in; ++c) {
    for (std::size_t i = 0; i < d.k; ++i) {
      for (std::size_t j = 0; j < d.k; ++j) {
        T* row = cols.row((c * d.k + i) * d.k + j).data();
        for (std::size_t y = 0; y < d.h_out; ++y) {
          const T* in_row = src + (c * d.h + y + i) * d.w + j;
          std::copy(in_row, in_row + d.w_out, row + y * d.w_out);
        }
      }
    }
  }
  return cols;
}

template <typename T>
void col2im_add(const RowMat<T>& cols, const ConvDims& d, Tensor<T>& out) {
  T* dst = out.data().data();
  for (std::size_t c = 0; c < d.c_in; ++c) {
    for (std::size_t i = 0; i < d.k; ++i) {
      for (std::size_t j = 0; j < d.k; ++j) {
        const T* row = cols.row((c * d.k + i) * d.k + j).data();
        for (std::size_t y = 0; y < d.h_out; ++y) {
          T* out_row = dst + (c * d.h + y + i) * d.w + j;
          const T* r = row + y * d.w_out;
          for (std::size_t x = 0; x < d.w_out; ++x) out_row[x] += r[x];
        }
      }
    }
  }
}

template <typename T>
void check_upstream(const Tensor<T>& upstream, const Shape& expected,
                    const char* op) {
  if (upstream.shape() != expected) {
    throw ShapeError(std::string(op) + ": upstream gradient shape " +
                     shape_to_string(upstream.shape()) + " != output shape " +
                     shape_to_string(expected));
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights,
                 const Tensor<T>& bias) {
  const ConvDims d = conv_dims(input.shape(), weights);
  if (bias.shape() != Shape{d.c_out}) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(d.c_out) + "]");
  }
  const RowMat<T> cols = im2col(input, d);
  Tensor<T> out({d.c_out, d.h_out, d.w_out});
  ConstMatMap<T> w(weights.data().data(), d.c_out, d.c_in * d.k * d.k);
  MatMap<T> o(out.data().data(), d.c_out, d.h_out * d.w_out);
  o.noalias() = w * cols;
  for (std::size_t c = 0; c < d.c_out; ++c) o.row(c).array() += bias[c];
  require_finite(out, "conv2d");
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& upstream, bool want_input_grad) {
  const ConvDims d = conv_dims(input.shape(), weights);
  check_upstream(upstream, {d.c_out, d.h_out, d.w_out}, "conv2d_backward");
  const RowMat<T> cols = im2col(input, d);
  ConstMatMap<T> g(upstream.data().data(), d.c_out, d.h_out * d.w_out);
  ConstMatMap<T> w(weights.data().data(), d.c_out, d.c_in * d.k * d.k);

  Conv2dGrads<T> grads;
  grads.weights = Tensor<T>(weights.shape());
  MatMap<T> gw(grads.weights.data().data(), d.c_out, d.c_in * d.k * d.k);
  gw.noalias() = g * cols.transpose();

  // Plain loop: Eigen's vectorized sum() depends on the row's alignment,
  // which would make results vary with allocation addresses.
  grads.bias = Tensor<T>({d.c_out});
  const std::size_t plane = d.h_out * d.w_out;
  for (std::size_t c = 0; c < d.c_out; ++c) {
    const T* row = upstream.data().data() + c * plane;
    T s{0};
    for (std::size_t i = 0; i < plane; ++i) s += row[i];
    grads.bias[c] = s;
  }

  if (want_input_grad) {
    const RowMat<T> gcols = w.transpose() * g;
    grads.input = Tensor<T>(input.shape());
    col2im_add(gcols, d, grads.input);
  }
  return grads;
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& weights,
                                const Tensor<T>& upstream,
                                const Shape& input_shape) {
  const ConvDims d = conv_dims(input_shape, weights);
  check_upstream(upstream, {d.c_out, d.h_out, d.w_out}, "conv2d_backward");
  ConstMatMap<T> g(upstream.data().data(), d.c_out, d.h_out * d.w_out);
  ConstMatMap<T> w(weights.data().data(), d.c_out, d.c_in * d.k * d.k);
  const RowMat<T> gcols = w.transpose() * g;
  Tensor<T> out(input_shape);
  col2im_add(gcols, d, out);
  return out;
}

template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input) {
  if (input.ndim() != 3) {
    throw ShapeError("maxpool2d: input must be [C,H,W], got " +
                     shape_to_string(input.shape()));
  }
  const std::size_t c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h < 2 || w < 2) {
    throw ShapeError("maxpool2d: input " + shape_to_string(input.shape()) +
                     " smaller than the 2x2 window");
  }
  const std::size_t ho = h / 2, wo = w / 2;
  PoolResult<T> r{Tensor<T>({c_n, ho, wo}), {}};
  r.argmax.resize(c_n * ho * wo);
  std::size_t o = 0;
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x, ++o) {
        std::size_t best = (c * h + 2 * y) * w + 2 * x;
        T best_v = input[best];
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * h + 2 * y + dy) * w + 2 * x + dx;
            if (input[idx] > best_v) {
              best_v = input[idx];
              best = idx;
            }
          }
        }
        r.output[o] = best_v;
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& upstream,
                             const std::vector<std::uint32_t>& argmax,
                             const Shape& input_shape) {
  if (upstream.size() != argmax.size()) {
    throw ShapeError("maxpool2d_backward: upstream size " +
                     std::to_string(upstream.size()) + " != argmax size " +
                     std::to_string(argmax.size()));
  }
  Tensor<T> out(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= out.size()) {
      throw ShapeError("maxpool2d_backward: argmax index out of range");
    }
    out[argmax[i]] += upstream[i];
  }
  return out;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights,
                const Tensor<T>& bias) {
  if (weights.ndim() != 2 || weights.dim(1) != input.size() ||
      bias.shape() != Shape{weights.dim(0)}) {
    throw ShapeError("dense: weights " + shape_to_string(weights.shape()) +
                     ", bias " + shape_to_string(bias.shape()) +
                     " incompatible with input of length " +
                     std::to_string(input.size()));
  }
  const std::size_t n_out = weights.dim(0), n_in = weights.dim(1);
  Tensor<T> out({n_out});
  ConstMatMap<T> w(weights.data().data(), n_out, n_in);
  Eigen::Map<const Vec<T>> x(input.data().data(), n_in);
  Eigen::Map<const Vec<T>> b(bias.data().data(), n_out);
  Eigen::Map<Vec<T>> y(out.data().data(), n_out);
  y.noalias() = w * x;
  y += b;
  require_finite(out, "dense");
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& upstream) {
  if (weights.ndim() != 2 || weights.dim(1) != input.size()) {
    throw ShapeError("dense_backward: weights/input mismatch");
  }
  const std::size_t n_out = weights.dim(0), n_in = weights.dim(1);
  check_upstream(upstream, {n_out}, "dense_backward");
  Eigen::Map<const Vec<T>> x(input.data().data(), n_in);
  Eigen::Map<const Vec<T>> g(upstream.data().data(), n_out);

  DenseGrads<T> grads;
  grads.weights = Tensor<T>(weights.shape());
  MatMap<T> gw(grads.weights.data().data(), n_out, n_in);
  gw.noalias() = g * x.transpose();
  grads.bias = upstream.reshaped({n_out});
  grads.input = dense_backward_input(weights, upstream).reshaped(input.shape());
  return grads;
}

template <typename T>
Tensor<T> dense_backward_input(const Tensor<T>& weights,
                               const Tensor<T>& upstream) {
  const std::size_t n_out = weights.dim(0), n_in = weights.dim(1);
  check_upstream(upstream, {n_out}, "dense_backward");
  ConstMatMap<T> w(weights.data().data(), n_out, n_in);
  Eigen::Map<const Vec<T>> g(upstream.data().data(), n_out);
  Tensor<T> out({n_in});
  Eigen::Map<Vec<T>> gx(out.data().data(), n_in);
  gx.noalias() = w.transpose() * g;
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (auto& v : out.vec()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream) {
  check_upstream(upstream, input.shape(), "relu_backward");
  Tensor<T> out = upstream;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(input[i] > T{0})) out[i] = T{0};
  }
  return out;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (auto& v : out.vec()) v = sigmoid(v);
  return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& input, const Tensor<T>& upstream) {
  check_upstream(upstream, input.shape(), "sigmoid_backward");
  Tensor<T> out = upstream;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T s = sigmoid(input[i]);
    out[i] *= s * (T{1} - s);
  }
  return out;
}

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& input, double p, Rng& rng,
                         bool training) {
  if (!(p >= 0.0) || p >= 1.0) {
    throw Error("dropout: probability must be in [0, 1), got " +
                std::to_string(p));
  }
  DropoutResult<T> r{input, Tensor<T>(input.shape(), T{1})};
  if (!training || p == 0.0) return r;
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T m = rng.bernoulli(p) ? T{0} : scale;
    r.mask[i] = m;
    r.output[i] = input[i] * m;
  }
  return r;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& upstream, const Tensor<T>& mask) {
  check_upstream(upstream, mask.shape(), "dropout_backward");
  Tensor<T> out = upstream;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

BceResult bce_loss(double logit, int target) {
  if (target != 0 && target != 1) {
    throw Error("bce_loss: target must be 0 or 1");
  }
  if (!std::isfinite(logit)) throw NonFiniteError("bce_loss: non-finite logit");
  const double t = target;
  BceResult r;
  r.loss = std::max(logit, 0.0) - logit * t + std::log1p(std::exp(-std::abs(logit)));
  // sigma(z) - t without cancellation: 1 - sigma(z) == sigma(-z).
  r.grad_logit = target == 1 ? -sigmoid(-logit) : sigmoid(logit);
  return r;
}

#define TUMORSCOPE_INSTANTIATE_OPS(T)                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&,                \
                            const Tensor<T>&);                                 \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&,  \
                                          const Tensor<T>&, bool);             \
  template Tensor<T> conv2d_backward_input(const Tensor<T>&, const Tensor<T>&, \
                                           const Shape&);                      \
  template PoolResult<T> maxpool2d(const Tensor<T>&);                          \
  template Tensor<T> maxpool2d_backward(                                       \
      const Tensor<T>&, const std::vector<std::uint32_t>&, const Shape&);      \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&,                 \
                           const Tensor<T>&);                                  \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&,    \
                                        const Tensor<T>&);                     \
  template Tensor<T> dense_backward_input(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> relu(const Tensor<T>&);                                   \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);        \
  template T sigmoid(T);                                                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                                \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);     \
  template DropoutResult<T> dropout(const Tensor<T>&, double, Rng&, bool);     \
  template Tensor<T> dropout_backward(const Tensor<T>&, const Tensor<T>&);

TUMORSCOPE_INSTANTIATE_OPS(float)
TUMORSCOPE_INSTANTIATE_OPS(double)

#undef TUMORSCOPE_INSTANTIATE_OPS

}  // namespace ops
}  // namespace tumorscope
