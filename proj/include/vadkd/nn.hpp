#pragma once

#include <string>
#include <vector>

#include "vadkd/ops.hpp"
#include "vadkd/rng.hpp"
#include "vadkd/tensor.hpp"

namespace vadkd {

// Named parameter registry. Names are the canonical checkpoint keys
// (e.g. "enc.conv0.w", "blk3.head2.q.dw.w"); buffers are non-trainable state
// saved alongside parameters (batch-norm running statistics).
template <class T>
struct ParamStoreT {
    std::vector<std::pair<std::string, TensorPtrT<T>>> params;
    std::vector<std::pair<std::string, std::vector<T>*>> buffers;

    TensorPtrT<T> add(const std::string& name, TensorPtrT<T> t) {
        params.emplace_back(name, t);
        return t;
    }
    void add_buffer(const std::string& name, std::vector<T>* buf) { buffers.emplace_back(name, buf); }

    std::vector<TensorPtrT<T>> tensors() const {
        std::vector<TensorPtrT<T>> out;
        out.reserve(params.size());
        for (const auto& [name, t] : params) out.push_back(t);
        return out;
    }
};

// Uniform init in +-sqrt(1/fan_in) for weights and biases, drawn from the
// given stream in a fixed order.
template <class T>
void init_uniform_fan_in(const TensorPtrT<T>& t, int64_t fan_in, Rng& rng);

template <class T>
struct Conv2dT {
    TensorPtrT<T> w, b;
    int stride = 1, padding = 0, groups = 1;

    Conv2dT() = default;
    Conv2dT(int64_t in_ch, int64_t out_ch, int64_t k, int stride, int padding, int groups, Rng& rng);

    TensorPtrT<T> forward(const TensorPtrT<T>& x) const { return conv2d<T>(x, w, b, stride, padding, groups); }
    void register_params(ParamStoreT<T>& store, const std::string& prefix) {
        store.add(prefix + ".w", w);
        store.add(prefix + ".b", b);
    }
};

template <class T>
struct ConvTranspose2dT {
    TensorPtrT<T> w, b;
    int stride = 1, padding = 0;

    ConvTranspose2dT() = default;
    ConvTranspose2dT(int64_t in_ch, int64_t out_ch, int64_t k, int stride, int padding, Rng& rng)
        : ConvTranspose2dT(in_ch, out_ch, k, k, stride, padding, rng) {}
    ConvTranspose2dT(int64_t in_ch, int64_t out_ch, int64_t kh, int64_t kw, int stride, int padding,
                     Rng& rng);

    TensorPtrT<T> forward(const TensorPtrT<T>& x) const { return conv_transpose2d<T>(x, w, b, stride, padding); }
    void register_params(ParamStoreT<T>& store, const std::string& prefix) {
        store.add(prefix + ".w", w);
        store.add(prefix + ".b", b);
    }
};

template <class T>
struct BatchNorm2dT {
    TensorPtrT<T> gamma, beta;
    std::vector<T> running_mean, running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    BatchNorm2dT() = default;
    explicit BatchNorm2dT(int64_t channels);

    TensorPtrT<T> forward(const TensorPtrT<T>& x, bool training) {
        return batch_norm2d<T>(x, gamma, beta, running_mean, running_var, training, momentum, eps);
    }
    void register_params(ParamStoreT<T>& store, const std::string& prefix) {
        store.add(prefix + ".gamma", gamma);
        store.add(prefix + ".beta", beta);
        store.add_buffer(prefix + ".rmean", &running_mean);
        store.add_buffer(prefix + ".rvar", &running_var);
    }
};

}  // namespace vadkd
