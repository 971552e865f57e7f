#include "vadkd/tensor.hpp"

namespace vadkd {

template <class T>
TensorPtrT<T> TensorT<T>::create(std::vector<int64_t> shape) {
    auto t = std::make_shared<TensorT<T>>();
    t->shape = std::move(shape);
    for (size_t i = 0; i < t->shape.size(); ++i) {
        if (t->shape[i] <= 0)
            throw ShapeError("tensor: dimension " + std::to_string(i) + " must be positive, got " +
                             std::to_string(t->shape[i]));
    }
    t->data.assign(static_cast<size_t>(t->numel()), T(0));
    return t;
}

template <class T>
TensorPtrT<T> TensorT<T>::leaf(std::vector<int64_t> shape, bool requires_grad) {
    auto t = create(std::move(shape));
    t->requires_grad = requires_grad;
    t->needs_grad = requires_grad;
    return t;
}

template <class T>
TensorPtrT<T> TensorT<T>::from_values(std::vector<int64_t> shape, std::vector<T> values) {
    auto t = create(std::move(shape));
    if (static_cast<int64_t>(values.size()) != t->numel())
        throw ShapeError("from_values: " + std::to_string(values.size()) + " values for shape of " +
                         std::to_string(t->numel()) + " elements");
    t->data = std::move(values);
    return t;
}

template <class T>
TensorPtrT<T> TensorT<T>::scalar(T value) {
    return from_values({1}, {value});
}

template <class T>
TensorPtrT<T> TensorT<T>::full(std::vector<int64_t> shape, T value) {
    auto t = create(std::move(shape));
    std::fill(t->data.begin(), t->data.end(), value);
    return t;
}

template <class T>
void TapeT<T>::backward(const TensorPtrT<T>& loss) {
    if (loss->numel() != 1)
        throw ShapeError("backward: loss must be scalar, got numel=" + std::to_string(loss->numel()));
    loss->ensure_grad();
    loss->grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!it->out->grad.empty()) it->backward();
    }
}

template struct TensorT<float>;
template struct TensorT<double>;
template class TapeT<float>;
template class TapeT<double>;

}  // namespace vadkd
