#include "vadkd/optim.hpp"

#include <cmath>

namespace vadkd {

template <class T>
void adam_step(const std::vector<TensorPtrT<T>>& params, AdamStateT<T>& state) {
    if (state.slots.size() != params.size())
        throw ShapeError("adam_step: state holds " + std::to_string(state.slots.size()) +
                         " slots for " + std::to_string(params.size()) + " parameters");
    state.step_count += 1;
    const T bc1 = T(1) - std::pow(state.beta1, T(state.step_count));
    const T bc2 = T(1) - std::pow(state.beta2, T(state.step_count));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        auto& slot = state.slots[pi];
        if (slot.m.size() != p.data.size())
            throw ShapeError("adam_step: moment buffer size mismatch at parameter " + std::to_string(pi));
        const bool has_grad = !p.grad.empty();
        for (size_t i = 0; i < p.data.size(); ++i) {
            T g = has_grad ? p.grad[i] : T(0);
            g += state.weight_decay * p.data[i];
            slot.m[i] = state.beta1 * slot.m[i] + (T(1) - state.beta1) * g;
            slot.v[i] = state.beta2 * slot.v[i] + (T(1) - state.beta2) * g * g;
            const T mhat = slot.m[i] / bc1;
            const T vhat = slot.v[i] / bc2;
            p.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

template <class T>
void zero_grads(const std::vector<TensorPtrT<T>>& params) {
    for (const auto& p : params) p->zero_grad();
}

template void adam_step<float>(const std::vector<TensorPtrT<float>>&, AdamStateT<float>&);
template void adam_step<double>(const std::vector<TensorPtrT<double>>&, AdamStateT<double>&);
template void zero_grads<float>(const std::vector<TensorPtrT<float>>&);
template void zero_grads<double>(const std::vector<TensorPtrT<double>>&);

}  // namespace vadkd
