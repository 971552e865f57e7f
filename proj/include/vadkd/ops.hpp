#pragma once

#include <vector>

#include "vadkd/tensor.hpp"

namespace vadkd {

// Forward ops over NCHW tensors. Every op registers an analytic backward rule
// on the active tape when any input needs a gradient; with no active tape the
// forward pass carries zero bookkeeping overhead (eval / benchmark path).
//
// Accumulation order inside each output element is fixed (channel-major, then
// kernel row, then kernel column), so repeated runs are bitwise identical and
// the 1x1 fast path matches the generic path exactly.

// x: N x C x H x W, w: OC x C/groups x KH x KW, b: OC (may be null).
template <class T>
TensorPtrT<T> conv2d(const TensorPtrT<T>& x, const TensorPtrT<T>& w, const TensorPtrT<T>& b,
                     int stride, int padding, int groups = 1);

// w: C x OC x KH x KW (input-major, mirroring conv2d's weight transpose role).
// Output spatial size: (in - 1) * stride - 2 * padding + k.
template <class T>
TensorPtrT<T> conv_transpose2d(const TensorPtrT<T>& x, const TensorPtrT<T>& w,
                               const TensorPtrT<T>& b, int stride, int padding);

// Per-channel batch normalization. Training mode normalizes with batch
// statistics and updates running_mean / running_var in place (they are plain
// buffers, not graph nodes); eval mode normalizes with the running buffers.
template <class T>
TensorPtrT<T> batch_norm2d(const TensorPtrT<T>& x, const TensorPtrT<T>& gamma,
                           const TensorPtrT<T>& beta, std::vector<T>& running_mean,
                           std::vector<T>& running_var, bool training, T momentum = T(0.1),
                           T eps = T(1e-5));

template <class T>
TensorPtrT<T> relu(const TensorPtrT<T>& x);

// Softmax over the last dimension, applied independently per row.
template <class T>
TensorPtrT<T> softmax_rows(const TensorPtrT<T>& x);

// 2-d (m,k)x(k,n) or batched 3-d (B,m,k)x(B,k,n); transpose_b flips the
// second operand's trailing two dims.
template <class T>
TensorPtrT<T> matmul(const TensorPtrT<T>& a, const TensorPtrT<T>& b, bool transpose_b = false);

template <class T>
TensorPtrT<T> add(const TensorPtrT<T>& a, const TensorPtrT<T>& b);

template <class T>
TensorPtrT<T> mul_scalar(const TensorPtrT<T>& x, T s);

template <class T>
TensorPtrT<T> sum(const TensorPtrT<T>& x);

template <class T>
TensorPtrT<T> concat_channels(const std::vector<TensorPtrT<T>>& xs);

template <class T>
TensorPtrT<T> reshape(const TensorPtrT<T>& x, std::vector<int64_t> shape);

// N x C x H x W  ->  N x (H*W) x C token matrix and back.
template <class T>
TensorPtrT<T> nchw_to_tokens(const TensorPtrT<T>& x);

template <class T>
TensorPtrT<T> tokens_to_nchw(const TensorPtrT<T>& x, int64_t h, int64_t w);

// Region i spans [floor(i*in/out), floor((i+1)*in/out)); requires out <= in.
// Gradient routes to the first (row-major) argmax of each region.
template <class T>
TensorPtrT<T> adaptive_max_pool2d(const TensorPtrT<T>& x, int64_t out_h, int64_t out_w);

// Nearest-neighbour upsampling; requires out >= in. Output cell i reads input
// cell floor(i*in/out).
template <class T>
TensorPtrT<T> upsample_nearest2d(const TensorPtrT<T>& x, int64_t out_h, int64_t out_w);

// Mean of squared differences over all elements.
template <class T>
TensorPtrT<T> mse_loss(const TensorPtrT<T>& pred, const TensorPtrT<T>& target);

// Mean over elements of BCE(sigmoid(logit), label), label constant 0 or 1.
// Log-sum-exp form, stable for |logit| well past 100.
template <class T>
TensorPtrT<T> bce_with_sigmoid(const TensorPtrT<T>& logit, T label);

// Copy that drops graph participation (constant from the tape's viewpoint).
template <class T>
TensorPtrT<T> detach(const TensorPtrT<T>& x);

template <class T>
bool all_finite(const TensorPtrT<T>& x);

// Output spatial size helpers shared by ops and model construction.
inline int64_t conv_out_size(int64_t in, int64_t k, int64_t stride, int64_t padding) {
    return (in + 2 * padding - k) / stride + 1;
}
inline int64_t conv_transpose_out_size(int64_t in, int64_t k, int64_t stride, int64_t padding) {
    return (in - 1) * stride - 2 * padding + k;
}

}  // namespace vadkd
