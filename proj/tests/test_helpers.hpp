#pragma once

#include <cstdint>
#include <vector>

#include "vadkd/rng.hpp"
#include "vadkd/tensor.hpp"

namespace vadkd::testing {

template <class T>
TensorPtrT<T> random_tensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
    auto t = TensorT<T>::leaf(std::move(shape), requires_grad);
    for (auto& v : t->data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

// FNV-1a over the raw value bytes; used to assert that parameter values are
// untouched by an update that must not reach them.
template <class T>
uint64_t value_hash(const std::vector<TensorPtrT<T>>& params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->data.data());
        for (size_t i = 0; i < p->data.size() * sizeof(T); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// Direct nested-loop convolution: the independent oracle conv2d is tested
// against.
template <class T>
std::vector<T> conv2d_oracle(const std::vector<T>& x, int64_t n, int64_t c, int64_t h, int64_t w,
                             const std::vector<T>& weight, const std::vector<T>& bias, int64_t oc,
                             int64_t kh, int64_t kw, int stride, int padding, int groups) {
    const int64_t cg = c / groups, ocg = oc / groups;
    const int64_t oh = (h + 2 * padding - kh) / stride + 1;
    const int64_t ow = (w + 2 * padding - kw) / stride + 1;
    std::vector<T> out(static_cast<size_t>(n * oc * oh * ow), T(0));
    for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t o = 0; o < oc; ++o) {
            const int64_t g = o / ocg;
            for (int64_t oy = 0; oy < oh; ++oy)
                for (int64_t ox = 0; ox < ow; ++ox) {
                    T acc = bias.empty() ? T(0) : bias[static_cast<size_t>(o)];
                    for (int64_t icl = 0; icl < cg; ++icl)
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t iy = oy * stride - padding + ky;
                                const int64_t ix = ox * stride - padding + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += x[static_cast<size_t>(((ni * c + g * cg + icl) * h + iy) * w + ix)] *
                                       weight[static_cast<size_t>(((o * cg + icl) * kh + ky) * kw + kx)];
                            }
                    out[static_cast<size_t>(((ni * oc + o) * oh + oy) * ow + ox)] = acc;
                }
        }
    return out;
}

}  // namespace vadkd::testing
