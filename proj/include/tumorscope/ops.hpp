#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tumorscope/rng.hpp"
#include "tumorscope/tensor.hpp"

// Layer primitives for the CNN: valid stride-1 convolution, 2x2/stride-2
// max pooling, fully connected layers, activations, inverted dropout and the
// logit-domain binary cross-entropy. Each forward has an exact analytic
// backward. All functions are pure; float and double are instantiated.
namespace tumorscope::ops {

// input [C_in,H,W], weights [C_out,C_in,K,K], bias [C_out]
// -> [C_out, H-K+1, W-K+1]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights,
                 const Tensor<T>& bias);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;  // empty when not requested
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& upstream,
                               bool want_input_grad = true);

// Gradient of a conv2d output w.r.t. its input only (transposed convolution).
template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& weights,
                                const Tensor<T>& upstream,
                                const Shape& input_shape);

template <typename T>
struct PoolResult {
  Tensor<T> output;
  // Flat index into the input of the winning element, one per output cell.
  std::vector<std::uint32_t> argmax;
};

// 2x2 window, stride 2, floor truncation. Ties go to the first element in
// row-major window order.
template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& upstream,
                             const std::vector<std::uint32_t>& argmax,
                             const Shape& input_shape);

// input [N_in], weights [N_out,N_in], bias [N_out] -> [N_out]
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights,
                const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& upstream);

template <typename T>
Tensor<T> dense_backward_input(const Tensor<T>& weights,
                               const Tensor<T>& upstream);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream);

template <typename T>
T sigmoid(T x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input);

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& input, const Tensor<T>& upstream);

template <typename T>
struct DropoutResult {
  Tensor<T> output;
  // Per-element multiplier: 0 for dropped, 1/(1-p) for kept, 1 at inference.
  Tensor<T> mask;
};

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& input, double p, Rng& rng,
                         bool training);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& upstream, const Tensor<T>& mask);

struct BceResult {
  double loss = 0.0;
  double grad_logit = 0.0;
};

// -[t log s(z) + (1-t) log(1 - s(z))] evaluated as
// max(z,0) - z t + log1p(exp(-|z|)); gradient s(z) - t.
BceResult bce_loss(double logit, int target);

}  // namespace tumorscope::ops
