#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "vadkd/ops.hpp"

using namespace vadkd;
using vadkd::testing::conv2d_oracle;
using vadkd::testing::random_tensor;

using T = double;
using Tensor = TensorT<T>;
using TensorPtr = TensorPtrT<T>;

TEST_CASE("conv2d: all-ones 3x3 kernel over all-ones 3x3 input sums to 9") {
    auto x = Tensor::full({1, 1, 3, 3}, 1.0);
    auto w = Tensor::full({1, 1, 3, 3}, 1.0);
    auto y = conv2d<T>(x, w, nullptr, 1, 0, 1);
    CHECK(y->shape == std::vector<int64_t>{1, 1, 1, 1});
    CHECK(y->data[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d: 16 filters of 7x7 over 3x64x64 yields 16x58x58") {
    Rng rng(1);
    auto x = random_tensor<T>({1, 3, 64, 64}, rng);
    auto w = random_tensor<T>({16, 3, 7, 7}, rng);
    auto b = random_tensor<T>({16}, rng);
    auto y = conv2d<T>(x, w, b, 1, 0, 1);
    CHECK(y->shape == std::vector<int64_t>{1, 16, 58, 58});
}

TEST_CASE("conv2d matches the direct nested-loop oracle") {
    Rng rng(7);
    auto x = random_tensor<T>({1, 2, 5, 5}, rng);
    auto w = random_tensor<T>({3, 2, 3, 3}, rng);
    auto b = random_tensor<T>({3}, rng);
    auto y = conv2d<T>(x, w, b, 2, 1, 1);
    const auto expect = conv2d_oracle<T>(x->data, 1, 2, 5, 5, w->data, b->data, 3, 3, 3, 2, 1, 1);
    REQUIRE(y->data.size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i) CHECK(y->data[i] == doctest::Approx(expect[i]).epsilon(1e-6));
}

TEST_CASE("conv2d grouped and depthwise cases match the oracle") {
    Rng rng(8);
    for (int groups : {2, 4}) {
        auto x = random_tensor<T>({2, 4, 6, 6}, rng);
        auto w = random_tensor<T>({4, 4 / groups, 3, 3}, rng);
        auto b = random_tensor<T>({4}, rng);
        auto y = conv2d<T>(x, w, b, 1, 1, groups);
        const auto expect = conv2d_oracle<T>(x->data, 2, 4, 6, 6, w->data, b->data, 4, 3, 3, 1, 1, groups);
        for (size_t i = 0; i < expect.size(); ++i)
            CHECK(y->data[i] == doctest::Approx(expect[i]).epsilon(1e-9));
    }
}

TEST_CASE("conv2d names the offending axis on shape mismatch") {
    auto x = Tensor::full({1, 5, 4, 4}, 1.0);
    auto w = Tensor::full({2, 2, 3, 3}, 1.0);
    CHECK_THROWS_WITH_AS(conv2d<T>(x, w, nullptr, 1, 1, 2), doctest::Contains("axis 1"), ShapeError);
    auto w2 = Tensor::full({2, 5, 9, 9}, 1.0);
    CHECK_THROWS_AS(conv2d<T>(x, w2, nullptr, 1, 0, 1), ShapeError);
}

TEST_CASE("conv2d with 1x1 kernel equals a per-pixel matrix multiply exactly") {
    Rng rng(9);
    auto x = random_tensor<T>({2, 5, 3, 3}, rng);
    auto w = random_tensor<T>({4, 5, 1, 1}, rng);
    auto b = random_tensor<T>({4}, rng);
    auto y = conv2d<T>(x, w, b, 1, 0, 1);
    // Per-pixel matmul oracle with the same accumulation order: bias first,
    // then channels ascending.
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t o = 0; o < 4; ++o)
            for (int64_t p = 0; p < 9; ++p) {
                T acc = b->data[o];
                for (int64_t ic = 0; ic < 5; ++ic) acc += w->data[o * 5 + ic] * x->data[(n * 5 + ic) * 9 + p];
                CHECK(y->data[(n * 4 + o) * 9 + p] == acc);  // bitwise
            }
}

TEST_CASE("conv_transpose2d stamps the kernel for a 1x1 input") {
    auto x = Tensor::full({1, 1, 1, 1}, 1.0);
    auto w = Tensor::full({1, 1, 3, 3}, 1.0);
    auto y = conv_transpose2d<T>(x, w, nullptr, 1, 0);
    CHECK(y->shape == std::vector<int64_t>{1, 1, 3, 3});
    for (T v : y->data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("conv_transpose2d inverts conv2d output shapes for the downsampling layer specs") {
    // Layer specs: 7x7 stride 1 pad 0 and 3x3 stride 2 pad 1, at sizes where
    // the strided floor is exactly invertible.
    struct Case {
        int64_t in, k;
        int stride, pad;
    };
    for (const Case c : {Case{64, 7, 1, 0}, Case{29, 3, 2, 1}, Case{15, 3, 2, 1}}) {
        const int64_t mid = conv_out_size(c.in, c.k, c.stride, c.pad);
        CHECK(conv_transpose_out_size(mid, c.k, c.stride, c.pad) == c.in);
    }
}

TEST_CASE("conv_transpose2d equals the autodiff input-gradient of conv2d") {
    Rng rng(10);
    // 5 -> 3 under (k=3, stride=2, pad=1) inverts exactly, so the transposed
    // conv covers every input position the conv gradient reaches.
    auto x = random_tensor<T>({1, 2, 5, 5}, rng, -1, 1, true);
    auto w = random_tensor<T>({3, 2, 3, 3}, rng);
    auto target = random_tensor<T>({1, 3, 3, 3}, rng);

    TapeT<T> tape;
    TensorPtr y, loss;
    {
        TapeT<T>::Scope scope(tape);
        y = conv2d<T>(x, w, nullptr, 2, 1, 1);
        loss = mse_loss<T>(y, target);
    }
    tape.backward(loss);

    // d(loss)/dx must equal conv_transpose2d(d(loss)/dy, w).
    auto gy = Tensor::from_values(y->shape, y->grad);
    auto expect = conv_transpose2d<T>(gy, w, nullptr, 2, 1);
    REQUIRE(expect->shape == x->shape);
    for (size_t i = 0; i < x->grad.size(); ++i)
        CHECK(x->grad[i] == doctest::Approx(expect->data[i]).epsilon(1e-6));
}

TEST_CASE("batch_norm2d training normalizes to zero mean unit variance") {
    Rng rng(11);
    auto x = random_tensor<T>({4, 3, 5, 5}, rng, -3, 5);
    auto gamma = Tensor::full({3}, 1.0);
    auto beta = Tensor::full({3}, 0.0);
    std::vector<T> rm(3, 0.0), rv(3, 1.0);
    auto y = batch_norm2d<T>(x, gamma, beta, rm, rv, true);
    for (int64_t c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        for (int64_t n = 0; n < 4; ++n)
            for (int64_t p = 0; p < 25; ++p) mean += y->data[(n * 3 + c) * 25 + p];
        mean /= 100.0;
        for (int64_t n = 0; n < 4; ++n)
            for (int64_t p = 0; p < 25; ++p) {
                const double d = y->data[(n * 3 + c) * 25 + p] - mean;
                var += d * d;
            }
        var /= 100.0;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("batch_norm2d eval with unit running stats is the identity") {
    Rng rng(12);
    auto x = random_tensor<T>({2, 2, 3, 3}, rng);
    auto gamma = Tensor::full({2}, 1.0);
    auto beta = Tensor::full({2}, 0.0);
    std::vector<T> rm(2, 0.0), rv(2, 1.0);
    auto y = batch_norm2d<T>(x, gamma, beta, rm, rv, false);
    for (size_t i = 0; i < x->data.size(); ++i)
        CHECK(y->data[i] == doctest::Approx(x->data[i]).epsilon(1e-5));
}

TEST_CASE("batch_norm2d survives a zero-variance channel in training mode") {
    auto x = Tensor::full({1, 1, 2, 2}, 3.5);
    auto gamma = Tensor::full({1}, 1.0);
    auto beta = Tensor::full({1}, 0.0);
    std::vector<T> rm(1, 0.0), rv(1, 1.0);
    auto y = batch_norm2d<T>(x, gamma, beta, rm, rv, true);
    for (T v : y->data) {
        CHECK(std::isfinite(v));
        CHECK(v == doctest::Approx(0.0));
    }
}

TEST_CASE("relu clamps negatives") {
    auto x = Tensor::from_values({3}, {-1.0, 0.0, 2.0});
    auto y = relu<T>(x);
    CHECK(y->data == std::vector<T>{0.0, 0.0, 2.0});
}

TEST_CASE("softmax_rows of a constant row is uniform") {
    auto x = Tensor::full({1, 3}, 0.0);
    auto y = softmax_rows<T>(x);
    for (T v : y->data) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("softmax_rows rows sum to one across wide input ranges") {
    for (uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(seed);
        auto x = random_tensor<T>({4, 7}, rng, -50, 50);
        auto y = softmax_rows<T>(x);
        for (int64_t r = 0; r < 4; ++r) {
            T total = 0;
            for (int64_t j = 0; j < 7; ++j) {
                const T v = y->data[r * 7 + j];
                CHECK(v >= 0.0);
                total += v;
            }
            CHECK(std::abs(total - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("matmul matches a nested-loop oracle and rejects bad inner dims") {
    Rng rng(13);
    auto a = random_tensor<T>({2, 3}, rng);
    auto b = random_tensor<T>({3, 2}, rng);
    auto y = matmul<T>(a, b);
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 2; ++j) {
            T acc = 0;
            for (int64_t k = 0; k < 3; ++k) acc += a->data[i * 3 + k] * b->data[k * 2 + j];
            CHECK(y->data[i * 2 + j] == doctest::Approx(acc).epsilon(1e-7));
        }
    auto bad = random_tensor<T>({4, 2}, rng);
    CHECK_THROWS_AS(matmul<T>(a, bad), ShapeError);
}

TEST_CASE("batched matmul with transpose_b matches per-slice oracles") {
    Rng rng(14);
    auto a = random_tensor<T>({3, 4, 5}, rng);
    auto b = random_tensor<T>({3, 6, 5}, rng);
    auto y = matmul<T>(a, b, true);
    REQUIRE(y->shape == std::vector<int64_t>{3, 4, 6});
    for (int64_t bi = 0; bi < 3; ++bi)
        for (int64_t i = 0; i < 4; ++i)
            for (int64_t j = 0; j < 6; ++j) {
                T acc = 0;
                for (int64_t k = 0; k < 5; ++k)
                    acc += a->data[(bi * 4 + i) * 5 + k] * b->data[(bi * 6 + j) * 5 + k];
                CHECK(y->data[(bi * 4 + i) * 6 + j] == doctest::Approx(acc).epsilon(1e-9));
            }
}

TEST_CASE("adaptive_max_pool2d partitions a 4x4 map into the expected 2x2 maxima") {
    std::vector<T> values;
    for (int i = 1; i <= 16; ++i) values.push_back(static_cast<T>(i));
    auto x = Tensor::from_values({1, 1, 4, 4}, values);
    auto y = adaptive_max_pool2d<T>(x, 2, 2);
    CHECK(y->data == std::vector<T>{6, 8, 14, 16});
}

TEST_CASE("adaptive_max_pool2d to 1x1 is the global max, exactly") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const int64_t h = 1 + static_cast<int64_t>(rng.below(12));
        const int64_t w = 1 + static_cast<int64_t>(rng.below(12));
        auto x = random_tensor<T>({1, 2, h, w}, rng, -5, 5);
        auto y = adaptive_max_pool2d<T>(x, 1, 1);
        for (int64_t c = 0; c < 2; ++c) {
            T best = x->data[c * h * w];
            for (int64_t p = 1; p < h * w; ++p) best = std::max(best, x->data[c * h * w + p]);
            CHECK(y->data[c] == best);  // bitwise
        }
    }
}

TEST_CASE("adaptive_max_pool2d at the input resolution is the identity") {
    Rng rng(15);
    auto x = random_tensor<T>({1, 1, 5, 7}, rng);
    auto y = adaptive_max_pool2d<T>(x, 5, 7);
    CHECK(y->data == x->data);
}

TEST_CASE("adaptive_max_pool2d rejects upsampling") {
    auto x = Tensor::full({1, 1, 2, 2}, 1.0);
    CHECK_THROWS_WITH_AS(adaptive_max_pool2d<T>(x, 4, 4), doctest::Contains("upsampling"), ShapeError);
}

TEST_CASE("upsample_nearest2d replicates values and preserves the maximum") {
    Rng rng(16);
    auto x = random_tensor<T>({1, 1, 4, 4}, rng);
    auto y = upsample_nearest2d<T>(x, 16, 16);
    CHECK(y->shape == std::vector<int64_t>{1, 1, 16, 16});
    for (int64_t oy = 0; oy < 16; ++oy)
        for (int64_t ox = 0; ox < 16; ++ox)
            CHECK(y->data[oy * 16 + ox] == x->data[(oy * 4 / 16) * 4 + ox * 4 / 16]);
    CHECK_THROWS_AS(upsample_nearest2d<T>(x, 2, 2), ShapeError);
}

TEST_CASE("mse_loss basics") {
    Rng rng(17);
    auto x = random_tensor<T>({2, 3}, rng);
    CHECK(mse_loss<T>(x, x)->data[0] == 0.0);
    auto a = Tensor::from_values({2, 2}, {1.0, 0.0, 0.0, 0.0});
    auto z = Tensor::full({2, 2}, 0.0);
    CHECK(mse_loss<T>(a, z)->data[0] == doctest::Approx(0.25));
    // Element-loop oracle on a random pair.
    auto p = random_tensor<T>({3, 5}, rng);
    auto q = random_tensor<T>({3, 5}, rng);
    T acc = 0;
    for (size_t i = 0; i < p->data.size(); ++i) {
        const T d = p->data[i] - q->data[i];
        acc += d * d;
    }
    CHECK(mse_loss<T>(p, q)->data[0] == doctest::Approx(acc / 15.0).epsilon(1e-7));
}

TEST_CASE("bce_with_sigmoid is ln 2 at logit zero and stable at extreme logits") {
    auto zero = Tensor::scalar(0.0);
    CHECK(bce_with_sigmoid<T>(zero, 1.0)->data[0] == doctest::Approx(std::log(2.0)));
    auto big = Tensor::scalar(100.0);
    CHECK(std::isfinite(bce_with_sigmoid<T>(big, 0.0)->data[0]));
    CHECK(bce_with_sigmoid<T>(big, 1.0)->data[0] == doctest::Approx(0.0));
    auto neg = Tensor::scalar(-100.0);
    CHECK(std::isfinite(bce_with_sigmoid<T>(neg, 1.0)->data[0]));
    CHECK(bce_with_sigmoid<T>(neg, 0.0)->data[0] == doctest::Approx(0.0));
}

TEST_CASE("token layout round-trips bitwise") {
    Rng rng(18);
    auto x = random_tensor<T>({2, 6, 3, 5}, rng);
    auto back = tokens_to_nchw<T>(nchw_to_tokens<T>(x), 3, 5);
    CHECK(back->data == x->data);
}

TEST_CASE("concat_channels stacks along axis 1") {
    Rng rng(19);
    auto a = random_tensor<T>({1, 2, 2, 2}, rng);
    auto b = random_tensor<T>({1, 3, 2, 2}, rng);
    auto y = concat_channels<T>({a, b});
    CHECK(y->shape == std::vector<int64_t>{1, 5, 2, 2});
    for (int64_t i = 0; i < 8; ++i) CHECK(y->data[i] == a->data[i]);
    for (int64_t i = 0; i < 12; ++i) CHECK(y->data[8 + i] == b->data[i]);
}

TEST_CASE("forward ops keep finite inputs finite") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        auto x = random_tensor<T>({2, 4, 8, 8}, rng, -10, 10);
        auto w = random_tensor<T>({4, 4, 3, 3}, rng);
        auto b = random_tensor<T>({4}, rng);
        auto gamma = Tensor::full({4}, 1.0);
        auto beta = Tensor::full({4}, 0.0);
        std::vector<T> rm(4, 0.0), rv(4, 1.0);
        auto y = relu<T>(batch_norm2d<T>(conv2d<T>(x, w, b, 2, 1, 1), gamma, beta, rm, rv, true));
        CHECK(all_finite<T>(y));
        CHECK(all_finite<T>(softmax_rows<T>(nchw_to_tokens<T>(y))));
    }
}

TEST_CASE("identical inputs give bitwise identical outputs and gradients across runs") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        auto x = random_tensor<T>({2, 3, 10, 10}, rng, -1, 1, true);
        auto w = random_tensor<T>({5, 3, 3, 3}, rng, -1, 1, true);
        auto b = random_tensor<T>({5}, rng, -1, 1, true);
        TapeT<T> tape;
        TensorPtr loss;
        {
            TapeT<T>::Scope scope(tape);
            auto y = relu<T>(conv2d<T>(x, w, b, 2, 1, 1));
            loss = mse_loss<T>(y, Tensor::full(y->shape, 0.25));
        }
        tape.backward(loss);
        std::vector<T> out = {loss->data[0]};
        out.insert(out.end(), w->grad.begin(), w->grad.end());
        out.insert(out.end(), x->grad.begin(), x->grad.end());
        return out;
    };
    CHECK(run(42) == run(42));
}
