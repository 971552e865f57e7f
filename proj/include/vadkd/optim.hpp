#pragma once

#include <cstdint>
#include <vector>

#include "vadkd/tensor.hpp"

namespace vadkd {

// Adam with L2 regularization folded into the gradient (not decoupled) and
// bias-corrected moments. lr / weight decay defaults follow the training
// configuration this project uses everywhere (1e-4 / 1e-5); beta1, beta2 and
// eps are the optimizer's stock values.
template <class T>
struct AdamStateT {
    struct Slot {
        std::vector<T> m, v;
    };

    T lr = T(1e-4);
    T weight_decay = T(1e-5);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    int64_t step_count = 0;
    std::vector<Slot> slots;

    void init(const std::vector<TensorPtrT<T>>& params) {
        slots.clear();
        slots.reserve(params.size());
        for (const auto& p : params)
            slots.push_back(Slot{std::vector<T>(p->data.size(), T(0)), std::vector<T>(p->data.size(), T(0))});
    }
};

// One update over all parameters; parameters with an empty grad are treated
// as zero-gradient (weight decay still applies).
template <class T>
void adam_step(const std::vector<TensorPtrT<T>>& params, AdamStateT<T>& state);

template <class T>
void zero_grads(const std::vector<TensorPtrT<T>>& params);

using AdamState32 = AdamStateT<float>;
using AdamState64 = AdamStateT<double>;

}  // namespace vadkd
