#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vadkd/tensor.hpp"

namespace vadkd {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    size_t worst_element = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Compares analytic gradients against central finite differences for every
// element of every listed input. `f` must rebuild the forward pass from the
// inputs' current values and return a scalar. Per element, h = 1e-5 *
// max(1, |x|); the relative error denominator is floored at 1e-6 so that
// elements where both gradients vanish count as agreeing.
template <class T>
GradCheckReport grad_check(const std::function<TensorPtrT<T>()>& f,
                           const std::vector<std::pair<std::string, TensorPtrT<T>>>& inputs);

}  // namespace vadkd
