#include "vadkd/grad_check.hpp"

#include <cmath>

namespace vadkd {

template <class T>
GradCheckReport grad_check(const std::function<TensorPtrT<T>()>& f,
                           const std::vector<std::pair<std::string, TensorPtrT<T>>>& inputs) {
    // Analytic pass.
    std::vector<std::vector<T>> analytic;
    {
        TapeT<T> tape;
        typename TapeT<T>::Scope scope(tape);
        for (auto& [name, t] : inputs) {
            t->requires_grad = true;
            t->needs_grad = true;
            t->grad.clear();
        }
        auto loss = f();
        tape.backward(loss);
        for (auto& [name, t] : inputs) {
            t->ensure_grad();
            analytic.push_back(t->grad);
        }
    }

    auto eval = [&]() -> double {
        auto loss = f();
        if (loss->numel() != 1) throw ShapeError("grad_check: function must be scalar-valued");
        return static_cast<double>(loss->data[0]);
    };

    GradCheckReport report;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = inputs[ti].second;
        t->grad.clear();
        for (size_t i = 0; i < t->data.size(); ++i) {
            const T saved = t->data[i];
            const T h = T(1e-5) * std::max(T(1), std::abs(saved));
            t->data[i] = saved + h;
            const double fp = eval();
            t->data[i] = saved - h;
            const double fm = eval();
            t->data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
            const double a = static_cast<double>(analytic[ti][i]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_tensor = inputs[ti].first;
                report.worst_element = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

template GradCheckReport grad_check<float>(const std::function<TensorPtrT<float>()>&,
                                           const std::vector<std::pair<std::string, TensorPtrT<float>>>&);
template GradCheckReport grad_check<double>(const std::function<TensorPtrT<double>()>&,
                                            const std::vector<std::pair<std::string, TensorPtrT<double>>>&);

}  // namespace vadkd
