#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "vadkd/grad_check.hpp"
#include "vadkd/ops.hpp"
#include "vadkd/optim.hpp"
#include "vadkd/student.hpp"

using namespace vadkd;
using vadkd::testing::random_tensor;

using T = double;
using Tensor = TensorT<T>;
using TensorPtr = TensorPtrT<T>;

TEST_CASE("backward of sum gives all-ones gradient") {
    Rng rng(1);
    auto x = random_tensor<T>({2, 2}, rng, -1, 1, true);
    TapeT<T> tape;
    TensorPtr loss;
    {
        TapeT<T>::Scope scope(tape);
        loss = sum<T>(x);
    }
    tape.backward(loss);
    CHECK(x->grad == std::vector<T>{1.0, 1.0, 1.0, 1.0});
}

TEST_CASE("backward of mse(w*x, y) matches the closed form 2x(wx - y)") {
    auto w = Tensor::leaf({1, 1});
    w->data[0] = 0.7;
    auto x = Tensor::from_values({1, 1}, {1.3});
    auto y = Tensor::from_values({1, 1}, {2.0});
    TapeT<T> tape;
    TensorPtr loss;
    {
        TapeT<T>::Scope scope(tape);
        loss = mse_loss<T>(matmul<T>(w, x), y);
    }
    tape.backward(loss);
    const T expect = 2.0 * 1.3 * (0.7 * 1.3 - 2.0);
    CHECK(w->grad[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gradients accumulate additively across shared subgraphs") {
    Rng rng(2);
    auto x = random_tensor<T>({3}, rng, -1, 1, true);
    TapeT<T> tape;
    TensorPtr loss;
    {
        TapeT<T>::Scope scope(tape);
        loss = sum<T>(add<T>(x, x));
    }
    tape.backward(loss);
    for (T g : x->grad) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("backward rejects a non-scalar loss") {
    Rng rng(3);
    auto x = random_tensor<T>({2, 2}, rng, -1, 1, true);
    TapeT<T> tape;
    TensorPtr y;
    {
        TapeT<T>::Scope scope(tape);
        y = relu<T>(x);
    }
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

namespace {

// Finite-difference sweep of one op configuration.
double check_op(const std::function<TensorPtr()>& f,
                const std::vector<std::pair<std::string, TensorPtr>>& inputs) {
    const auto report = grad_check<T>(f, inputs);
    return report.max_rel_error;
}

}  // namespace

TEST_CASE("finite-difference checks: every differentiable op, 20+ seeds") {
    double worst = 0.0;
    for (uint64_t seed = 0; seed < 21; ++seed) {
        Rng rng(seed);

        {  // conv2d (stride/pad/groups vary by seed)
            const int stride = 1 + static_cast<int>(seed % 2);
            const int pad = static_cast<int>(seed % 2);
            const int groups = (seed % 3 == 0) ? 2 : 1;
            auto x = random_tensor<T>({2, 4, 5, 5}, rng, -1, 1, true);
            auto w = random_tensor<T>({4, 4 / groups, 3, 3}, rng, -1, 1, true);
            auto b = random_tensor<T>({4}, rng, -1, 1, true);
            auto tgt = Tensor::full({1}, 0.0);
            auto f = [&]() {
                return mse_loss<T>(sum<T>(conv2d<T>(x, w, b, stride, pad, groups)), tgt);
            };
            worst = std::max(worst, check_op(f, {{"x", x}, {"w", w}, {"b", b}}));
        }
        {  // relu, inputs kept clear of the kink so the central difference
           // stays on one side
            auto x = random_tensor<T>({3, 7}, rng, -1, 1, true);
            for (auto& v : x->data)
                if (std::abs(v) < 1e-3) v += v < 0 ? -1e-3 : 1e-3;
            auto tgt = Tensor::full({3, 7}, 0.4);
            auto f = [&]() { return mse_loss<T>(relu<T>(x), tgt); };
            worst = std::max(worst, check_op(f, {{"x", x}}));
        }
        {  // conv_transpose2d
            auto x = random_tensor<T>({1, 3, 4, 4}, rng, -1, 1, true);
            auto w = random_tensor<T>({3, 2, 3, 3}, rng, -1, 1, true);
            auto b = random_tensor<T>({2}, rng, -1, 1, true);
            auto tgt = Tensor::full({1}, 0.1);
            auto f = [&]() { return mse_loss<T>(sum<T>(conv_transpose2d<T>(x, w, b, 2, 1)), tgt); };
            worst = std::max(worst, check_op(f, {{"x", x}, {"w", w}, {"b", b}}));
        }
        {  // batch_norm2d, training mode
            auto x = random_tensor<T>({3, 2, 4, 4}, rng, -2, 2, true);
            auto gamma = random_tensor<T>({2}, rng, 0.5, 1.5, true);
            auto beta = random_tensor<T>({2}, rng, -0.5, 0.5, true);
            auto tgt = Tensor::full({3, 2, 4, 4}, 0.3);
            auto f = [&]() {
                std::vector<T> rm(2, 0.0), rv(2, 1.0);
                return mse_loss<T>(batch_norm2d<T>(x, gamma, beta, rm, rv, true), tgt);
            };
            worst = std::max(worst, check_op(f, {{"x", x}, {"gamma", gamma}, {"beta", beta}}));
        }
        {  // batch_norm2d, eval mode
            auto x = random_tensor<T>({2, 2, 3, 3}, rng, -2, 2, true);
            auto gamma = random_tensor<T>({2}, rng, 0.5, 1.5, true);
            auto beta = random_tensor<T>({2}, rng, -0.5, 0.5, true);
            auto tgt = Tensor::full({2, 2, 3, 3}, -0.1);
            std::vector<T> rm = {0.2, -0.4}, rv = {1.3, 0.8};
            auto f = [&]() {
                std::vector<T> rm_copy = rm, rv_copy = rv;
                return mse_loss<T>(batch_norm2d<T>(x, gamma, beta, rm_copy, rv_copy, false), tgt);
            };
            worst = std::max(worst, check_op(f, {{"x", x}, {"gamma", gamma}, {"beta", beta}}));
        }
        {  // softmax_rows + matmul chain (both transpose modes)
            auto q = random_tensor<T>({2, 3, 4}, rng, -1, 1, true);
            auto k = random_tensor<T>({2, 5, 4}, rng, -1, 1, true);
            auto v = random_tensor<T>({2, 5, 4}, rng, -1, 1, true);
            auto tgt = Tensor::full({2, 3, 4}, 0.0);
            auto f = [&]() {
                auto scores = mul_scalar<T>(matmul<T>(q, k, true), 0.5);
                return mse_loss<T>(matmul<T>(softmax_rows<T>(scores), v), tgt);
            };
            worst = std::max(worst, check_op(f, {{"q", q}, {"k", k}, {"v", v}}));
        }
        {  // adaptive_max_pool2d and upsample_nearest2d; values spaced apart
           // so a perturbation cannot flip a region's argmax mid-difference
            auto x = random_tensor<T>({1, 2, 6, 6}, rng, -1, 1, true);
            for (size_t i = 0; i < x->data.size(); ++i) x->data[i] += 0.01 * static_cast<double>(i);
            auto tgt = Tensor::full({1, 2, 3, 3}, 0.2);
            auto f = [&]() { return mse_loss<T>(adaptive_max_pool2d<T>(x, 3, 3), tgt); };
            worst = std::max(worst, check_op(f, {{"x", x}}));
            auto tgt2 = Tensor::full({1, 2, 12, 12}, -0.2);
            auto f2 = [&]() { return mse_loss<T>(upsample_nearest2d<T>(x, 12, 12), tgt2); };
            worst = std::max(worst, check_op(f2, {{"x", x}}));
        }
        {  // bce, concat, reshape, mul_scalar
            auto a = random_tensor<T>({1, 2, 2, 2}, rng, -3, 3, true);
            auto b = random_tensor<T>({1, 1, 2, 2}, rng, -3, 3, true);
            auto f = [&]() {
                auto cat = concat_channels<T>({a, b});
                auto flat = reshape<T>(cat, {1, 12});
                return mul_scalar<T>(bce_with_sigmoid<T>(flat, 1.0), 1.7);
            };
            worst = std::max(worst, check_op(f, {{"a", a}, {"b", b}}));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("grad_check reports the worst element index") {
    Rng rng(33);
    auto x = random_tensor<T>({2, 3}, rng, -1, 1, true);
    auto tgt = Tensor::full({2, 3}, 0.0);
    const auto report = grad_check<T>([&]() { return mse_loss<T>(x, tgt); }, {{"x", x}});
    CHECK(report.max_rel_error < 1e-6);
    CHECK(report.worst_tensor == "x");
    CHECK(report.worst_element < 6);
}

TEST_CASE("adam first step on unit gradient moves by about -lr") {
    auto p = Tensor::leaf({1});
    p->data[0] = 0.0;
    p->ensure_grad();
    p->grad[0] = 1.0;
    AdamStateT<T> state;
    state.lr = 1e-4;
    state.weight_decay = 0.0;
    state.init({p});
    adam_step<T>({p}, state);
    CHECK(std::abs(p->data[0] + 1e-4) < 1e-9);
    CHECK(state.step_count == 1);
}

TEST_CASE("adam leaves parameters unchanged on zero gradient and zero decay") {
    auto p = Tensor::leaf({3});
    p->data = {1.0, -2.0, 3.0};
    p->ensure_grad();
    AdamStateT<T> state;
    state.weight_decay = 0.0;
    state.init({p});
    adam_step<T>({p}, state);
    CHECK(p->data == std::vector<T>{1.0, -2.0, 3.0});
}

TEST_CASE("adam converges on a convex quadratic") {
    auto p = Tensor::leaf({1});
    p->data[0] = 0.0;
    auto target = Tensor::scalar(3.0);
    AdamStateT<T> state;
    state.lr = 0.1;
    state.weight_decay = 0.0;
    state.init({p});
    auto step_once = [&]() {
        TapeT<T> tape;
        TensorPtr loss;
        {
            TapeT<T>::Scope scope(tape);
            loss = mse_loss<T>(p, target);
        }
        zero_grads<T>({p});
        tape.backward(loss);
        adam_step<T>({p}, state);
    };
    for (int step = 0; step < 100; ++step) step_once();
    // The convex-quadratic oracle (verified against a reference Adam) sits at
    // |p - 3| ~= 0.0193 after 100 steps; momentum is still ringing there.
    CHECK(std::abs(p->data[0] - 3.0) < 0.02);
    for (int step = 0; step < 200; ++step) step_once();
    CHECK(std::abs(p->data[0] - 3.0) < 1e-3);
}

TEST_CASE("grad_check instantiation: full CvT block") {
    ModelConfig cfg;
    cfg.m = 1;
    cfg.s = 2;
    cfg.d = 3;
    cfg.c = 6;
    cfg.downsample_filters = {4, 6};
    cfg.input_h = 14;
    cfg.input_w = 14;
    cfg.head_resolutions = {{1, 1}, {2, 2}};
    auto model = build_student<T>(cfg, 5);
    auto& block = model.blocks[0];

    Rng rng(6);
    auto p = random_tensor<T>({2, 6, 4, 4}, rng, -1, 1, false);
    auto tgt = Tensor::full({2, 6, 4, 4}, 0.1);
    auto params = model.encoder_store();

    // Check against the block's own parameters (a representative subset of
    // each kind) plus the input tensor.
    std::vector<std::pair<std::string, TensorPtr>> inputs = {
        {"p", p},
        {"q.dw.w", block.heads[0].q.dw.w},
        {"k.pw.w", block.heads[0].k.pw.w},
        {"v.bn.gamma", block.heads[0].v.bn.gamma},
        {"proj.w", block.proj.w},
        {"bn.beta", block.bn.beta},
        {"ffn1.w", block.ffn1.w},
        {"ffn2.b", block.ffn2.b},
    };
    p->requires_grad = p->needs_grad = true;
    auto f = [&]() {
        for (auto& head : block.heads) {
            head.q.bn.running_mean.assign(head.q.bn.running_mean.size(), 0.0);
            head.q.bn.running_var.assign(head.q.bn.running_var.size(), 1.0);
        }
        return mse_loss<T>(block.forward(p, true), tgt);
    };
    const auto report = grad_check<T>(f, inputs);
    CHECK(report.max_rel_error < 1e-4);
}
