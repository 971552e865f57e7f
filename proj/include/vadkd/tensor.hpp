#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace vadkd {

// Thrown by ops on dimension mismatches; the message names the op and the
// offending axis.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

class NumericsError : public std::runtime_error {
public:
    explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

template <class T>
struct TensorT;

template <class T>
using TensorPtrT = std::shared_ptr<TensorT<T>>;

// Dense row-major n-d array. `requires_grad` marks trainable leaves;
// `needs_grad` additionally marks intermediates that depend on one, so the
// backward sweep knows where gradient flow stops. `grad` stays empty until
// the first accumulation into it.
template <class T>
struct TensorT {
    std::vector<int64_t> shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool needs_grad = false;

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }

    int ndim() const { return static_cast<int>(shape.size()); }

    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }

    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }

    static TensorPtrT<T> create(std::vector<int64_t> shape);
    static TensorPtrT<T> leaf(std::vector<int64_t> shape, bool requires_grad = true);
    static TensorPtrT<T> from_values(std::vector<int64_t> shape, std::vector<T> values);
    static TensorPtrT<T> scalar(T value);
    static TensorPtrT<T> full(std::vector<int64_t> shape, T value);

    T item() const {
        if (numel() != 1)
            throw ShapeError("item: tensor is not a scalar (numel=" + std::to_string(numel()) + ")");
        return data[0];
    }
};

// Wengert list. Ops append nodes in creation order, which is already a
// topological order of the forward graph; the backward sweep walks it in
// reverse and fires each node at most once, skipping nodes whose output never
// received a gradient.
template <class T>
class TapeT {
public:
    struct Node {
        TensorPtrT<T> out;
        std::function<void()> backward;
    };

    void record(TensorPtrT<T> out, std::function<void()> backward) {
        nodes_.push_back(Node{std::move(out), std::move(backward)});
    }

    // Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
    void backward(const TensorPtrT<T>& loss);

    void clear() { nodes_.clear(); }

    size_t size() const { return nodes_.size(); }

    static TapeT* current() { return current_slot(); }

    // RAII activation; ops record onto the innermost active tape.
    class Scope {
    public:
        explicit Scope(TapeT& tape) : prev_(current_slot()) { current_slot() = &tape; }
        ~Scope() { current_slot() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        TapeT* prev_;
    };

private:
    static TapeT*& current_slot() {
        thread_local TapeT* current = nullptr;
        return current;
    }

    std::vector<Node> nodes_;
};

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace vadkd
