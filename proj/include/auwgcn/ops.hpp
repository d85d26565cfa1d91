#pragma once

#include "auwgcn/tensor.hpp"

namespace auwgcn {

// a: m x k, b: k x n -> m x n
Tensor matmul(const Tensor& a, const Tensor& b);
// accumulates dA = G B^T, dB = A^T G into ga / gb
void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& gout, Tensor& ga, Tensor& gb);

Tensor relu(const Tensor& x);
// grad masked by x > 0
Tensor relu_backward(const Tensor& x, const Tensor& gout);

// input: C_in x T, weight: C_out x C_in x k (k odd), bias: C_out, stride 1,
// zero padding (k-1)*d/2 each side so the output is C_out x T.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation);
void conv1d_backward(const Tensor& input, const Tensor& weight, const Tensor& gout, int dilation,
                     Tensor& ginput, Tensor& gweight, Tensor& gbias);

Tensor sigmoid(const Tensor& x);
// y = sigmoid(x)
Tensor sigmoid_backward(const Tensor& y, const Tensor& gout);

// x: C x T, softmax over the channel axis per column, max-subtracted
Tensor softmax_over_channels(const Tensor& x);
// p = softmax(x)
Tensor softmax_backward(const Tensor& p, const Tensor& gout);

}  // namespace auwgcn
