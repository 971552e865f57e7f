#include "vadkd/nn.hpp"

#include <cmath>

namespace vadkd {

template <class T>
void init_uniform_fan_in(const TensorPtrT<T>& t, int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (auto& v : t->data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
Conv2dT<T>::Conv2dT(int64_t in_ch, int64_t out_ch, int64_t k, int stride, int padding, int groups,
                    Rng& rng)
    : stride(stride), padding(padding), groups(groups) {
    w = TensorT<T>::leaf({out_ch, in_ch / groups, k, k});
    b = TensorT<T>::leaf({out_ch});
    const int64_t fan_in = (in_ch / groups) * k * k;
    init_uniform_fan_in(w, fan_in, rng);
    init_uniform_fan_in(b, fan_in, rng);
}

template <class T>
ConvTranspose2dT<T>::ConvTranspose2dT(int64_t in_ch, int64_t out_ch, int64_t kh, int64_t kw,
                                      int stride, int padding, Rng& rng)
    : stride(stride), padding(padding) {
    w = TensorT<T>::leaf({in_ch, out_ch, kh, kw});
    b = TensorT<T>::leaf({out_ch});
    const int64_t fan_in = in_ch * kh * kw;
    init_uniform_fan_in(w, fan_in, rng);
    init_uniform_fan_in(b, fan_in, rng);
}

template <class T>
BatchNorm2dT<T>::BatchNorm2dT(int64_t channels) {
    gamma = TensorT<T>::full({channels}, T(1));
    gamma->requires_grad = gamma->needs_grad = true;
    beta = TensorT<T>::leaf({channels});
    running_mean.assign(static_cast<size_t>(channels), T(0));
    running_var.assign(static_cast<size_t>(channels), T(1));
}

template void init_uniform_fan_in<float>(const TensorPtrT<float>&, int64_t, Rng&);
template void init_uniform_fan_in<double>(const TensorPtrT<double>&, int64_t, Rng&);
template struct Conv2dT<float>;
template struct Conv2dT<double>;
template struct ConvTranspose2dT<float>;
template struct ConvTranspose2dT<double>;
template struct BatchNorm2dT<float>;
template struct BatchNorm2dT<double>;

}  // namespace vadkd
