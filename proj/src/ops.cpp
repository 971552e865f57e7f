#include "vadkd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace vadkd {

namespace {

template <class T>
bool grad_wanted(std::initializer_list<const TensorPtrT<T>*> inputs) {
    if (!TapeT<T>::current()) return false;
    for (auto* in : inputs)
        if (*in && (*in)->needs_grad) return true;
    return false;
}

template <class T>
void record(TensorPtrT<T> out, std::function<void()> backward) {
    out->needs_grad = true;
    TapeT<T>::current()->record(std::move(out), std::move(backward));
}

template <class T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace

template <class T>
TensorPtrT<T> conv2d(const TensorPtrT<T>& x, const TensorPtrT<T>& w, const TensorPtrT<T>& b,
                     int stride, int padding, int groups) {
    if (x->ndim() != 4) throw ShapeError("conv2d: input must be NCHW, got ndim=" + std::to_string(x->ndim()));
    if (w->ndim() != 4) throw ShapeError("conv2d: weight must be 4-d, got ndim=" + std::to_string(w->ndim()));
    const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), win = x->dim(3);
    const int64_t oc = w->dim(0), wc = w->dim(1), kh = w->dim(2), kw = w->dim(3);
    if (groups < 1 || c % groups != 0)
        throw ShapeError("conv2d: input channel axis 1 (" + std::to_string(c) +
                         ") not divisible by groups=" + std::to_string(groups));
    if (oc % groups != 0)
        throw ShapeError("conv2d: output channel axis 0 (" + std::to_string(oc) +
                         ") not divisible by groups=" + std::to_string(groups));
    if (wc != c / groups)
        throw ShapeError("conv2d: weight axis 1 is " + std::to_string(wc) + ", expected input_channels/groups = " +
                         std::to_string(c / groups));
    if (b && (b->ndim() != 1 || b->dim(0) != oc))
        throw ShapeError("conv2d: bias axis 0 must equal out channels " + std::to_string(oc));
    const int64_t oh = conv_out_size(h, kh, stride, padding);
    const int64_t ow = conv_out_size(win, kw, stride, padding);
    if (h + 2 * padding < kh || win + 2 * padding < kw || oh < 1 || ow < 1)
        throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " does not fit padded input on spatial axes 2,3 (" + std::to_string(h) + "x" +
                         std::to_string(win) + ", padding=" + std::to_string(padding) + ")");

    auto out = TensorT<T>::create({n, oc, oh, ow});
    const T* xd = x->data.data();
    const T* wd = w->data.data();
    const T* bd = b ? b->data.data() : nullptr;
    T* od = out->data.data();
    const int64_t cg = c / groups, ocg = oc / groups;
    const int64_t xs_n = c * h * win, xs_c = h * win;
    const int64_t ws_o = wc * kh * kw, ws_c = kh * kw;
    const int64_t os_n = oc * oh * ow, os_c = oh * ow;

    const bool pointwise = (kh == 1 && kw == 1 && stride == 1 && padding == 0 && groups == 1);
    if (pointwise) {
        // 1x1 path: per-pixel channel mix, vectorized over positions. Same
        // per-element accumulation order as the generic loop below.
        const int64_t hw = h * win;
        for (int64_t ni = 0; ni < n; ++ni) {
            for (int64_t o = 0; o < oc; ++o) {
                T* orow = od + ni * os_n + o * hw;
                const T bias = bd ? bd[o] : T(0);
                for (int64_t p = 0; p < hw; ++p) orow[p] = bias;
                for (int64_t ic = 0; ic < c; ++ic) {
                    const T wv = wd[o * c + ic];
                    const T* xrow = xd + ni * xs_n + ic * hw;
                    for (int64_t p = 0; p < hw; ++p) orow[p] += wv * xrow[p];
                }
            }
        }
    } else {
        for (int64_t ni = 0; ni < n; ++ni) {
            for (int64_t o = 0; o < oc; ++o) {
                const int64_t g = o / ocg;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        T acc = bd ? bd[o] : T(0);
                        for (int64_t icl = 0; icl < cg; ++icl) {
                            const int64_t ic = g * cg + icl;
                            const T* xc = xd + ni * xs_n + ic * xs_c;
                            const T* wr = wd + o * ws_o + icl * ws_c;
                            for (int64_t ky = 0; ky < kh; ++ky) {
                                const int64_t iy = oy * stride - padding + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int64_t kx = 0; kx < kw; ++kx) {
                                    const int64_t ix = ox * stride - padding + kx;
                                    if (ix < 0 || ix >= win) continue;
                                    acc += xc[iy * win + ix] * wr[ky * kw + kx];
                                }
                            }
                        }
                        od[ni * os_n + o * os_c + oy * ow + ox] = acc;
                    }
                }
            }
        }
    }

    if (grad_wanted<T>({&x, &w, &b})) {
        record<T>(out, [x, w, b, out, stride, padding, groups, n, c, h, win, oc, oh, ow, kh, kw, cg,
                        ocg, xs_n, xs_c, ws_o, ws_c, os_n, os_c]() {
            const T* gy = out->grad.data();
            const T* xd = x->data.data();
            const T* wd = w->data.data();
            if (x->needs_grad) {
                x->ensure_grad();
                T* gx = x->grad.data();
                for (int64_t ni = 0; ni < n; ++ni) {
                    for (int64_t ic = 0; ic < c; ++ic) {
                        const int64_t g = ic / cg, icl = ic % cg;
                        T* gxc = gx + ni * xs_n + ic * xs_c;
                        for (int64_t iy = 0; iy < h; ++iy) {
                            for (int64_t ix = 0; ix < win; ++ix) {
                                T acc = T(0);
                                for (int64_t o = g * ocg; o < (g + 1) * ocg; ++o) {
                                    const T* wr = wd + o * ws_o + icl * ws_c;
                                    const T* gyc = gy + ni * os_n + o * os_c;
                                    for (int64_t ky = 0; ky < kh; ++ky) {
                                        const int64_t oyn = iy + padding - ky;
                                        if (oyn < 0 || oyn % stride != 0) continue;
                                        const int64_t oy = oyn / stride;
                                        if (oy >= oh) continue;
                                        for (int64_t kx = 0; kx < kw; ++kx) {
                                            const int64_t oxn = ix + padding - kx;
                                            if (oxn < 0 || oxn % stride != 0) continue;
                                            const int64_t ox = oxn / stride;
                                            if (ox >= ow) continue;
                                            acc += wr[ky * kw + kx] * gyc[oy * ow + ox];
                                        }
                                    }
                                }
                                gxc[iy * win + ix] += acc;
                            }
                        }
                    }
                }
            }
            if (w->needs_grad) {
                w->ensure_grad();
                T* gw = w->grad.data();
                for (int64_t o = 0; o < oc; ++o) {
                    const int64_t g = o / ocg;
                    for (int64_t icl = 0; icl < cg; ++icl) {
                        const int64_t ic = g * cg + icl;
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                T acc = T(0);
                                for (int64_t ni = 0; ni < n; ++ni) {
                                    const T* xc = xd + ni * xs_n + ic * xs_c;
                                    const T* gyc = gy + ni * os_n + o * os_c;
                                    for (int64_t oy = 0; oy < oh; ++oy) {
                                        const int64_t iy = oy * stride - padding + ky;
                                        if (iy < 0 || iy >= h) continue;
                                        for (int64_t ox = 0; ox < ow; ++ox) {
                                            const int64_t ix = ox * stride - padding + kx;
                                            if (ix < 0 || ix >= win) continue;
                                            acc += xc[iy * win + ix] * gyc[oy * ow + ox];
                                        }
                                    }
                                }
                                gw[o * ws_o + icl * ws_c + ky * kw + kx] += acc;
                            }
                        }
                    }
                }
            }
            if (b && b->needs_grad) {
                b->ensure_grad();
                T* gb = b->grad.data();
                for (int64_t ni = 0; ni < n; ++ni)
                    for (int64_t o = 0; o < oc; ++o) {
                        const T* gyc = gy + ni * os_n + o * os_c;
                        T acc = T(0);
                        for (int64_t p = 0; p < os_c; ++p) acc += gyc[p];
                        gb[o] += acc;
                    }
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> conv_transpose2d(const TensorPtrT<T>& x, const TensorPtrT<T>& w,
                               const TensorPtrT<T>& b, int stride, int padding) {
    if (x->ndim() != 4) throw ShapeError("conv_transpose2d: input must be NCHW");
    if (w->ndim() != 4) throw ShapeError("conv_transpose2d: weight must be 4-d");
    const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), win = x->dim(3);
    const int64_t wc = w->dim(0), oc = w->dim(1), kh = w->dim(2), kw = w->dim(3);
    if (wc != c)
        throw ShapeError("conv_transpose2d: weight axis 0 is " + std::to_string(wc) +
                         ", expected input channels " + std::to_string(c));
    if (b && (b->ndim() != 1 || b->dim(0) != oc))
        throw ShapeError("conv_transpose2d: bias axis 0 must equal out channels " + std::to_string(oc));
    const int64_t oh = conv_transpose_out_size(h, kh, stride, padding);
    const int64_t ow = conv_transpose_out_size(win, kw, stride, padding);
    if (oh < 1 || ow < 1)
        throw ShapeError("conv_transpose2d: output spatial size would be " + std::to_string(oh) + "x" +
                         std::to_string(ow) + " on axes 2,3");

    auto out = TensorT<T>::create({n, oc, oh, ow});
    const T* xd = x->data.data();
    const T* wd = w->data.data();
    const T* bd = b ? b->data.data() : nullptr;
    T* od = out->data.data();
    const int64_t xs_n = c * h * win, xs_c = h * win;
    const int64_t ws_c = oc * kh * kw, ws_o = kh * kw;
    const int64_t os_n = oc * oh * ow, os_c = oh * ow;

    for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t o = 0; o < oc; ++o) {
            for (int64_t oy = 0; oy < oh; ++oy) {
                for (int64_t ox = 0; ox < ow; ++ox) {
                    T acc = bd ? bd[o] : T(0);
                    for (int64_t ic = 0; ic < c; ++ic) {
                        const T* xc = xd + ni * xs_n + ic * xs_c;
                        const T* wr = wd + ic * ws_c + o * ws_o;
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            const int64_t iyn = oy + padding - ky;
                            if (iyn < 0 || iyn % stride != 0) continue;
                            const int64_t iy = iyn / stride;
                            if (iy >= h) continue;
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t ixn = ox + padding - kx;
                                if (ixn < 0 || ixn % stride != 0) continue;
                                const int64_t ix = ixn / stride;
                                if (ix >= win) continue;
                                acc += xc[iy * win + ix] * wr[ky * kw + kx];
                            }
                        }
                    }
                    od[ni * os_n + o * os_c + oy * ow + ox] = acc;
                }
            }
        }
    }

    if (grad_wanted<T>({&x, &w, &b})) {
        record<T>(out, [x, w, b, out, stride, padding, n, c, h, win, oc, oh, ow, kh, kw, xs_n, xs_c,
                        ws_c, ws_o, os_n, os_c]() {
            const T* gy = out->grad.data();
            const T* xd = x->data.data();
            const T* wd = w->data.data();
            if (x->needs_grad) {
                // d/dx of the scatter is a plain strided correlation.
                x->ensure_grad();
                T* gx = x->grad.data();
                for (int64_t ni = 0; ni < n; ++ni) {
                    for (int64_t ic = 0; ic < c; ++ic) {
                        T* gxc = gx + ni * xs_n + ic * xs_c;
                        for (int64_t iy = 0; iy < h; ++iy) {
                            for (int64_t ix = 0; ix < win; ++ix) {
                                T acc = T(0);
                                for (int64_t o = 0; o < oc; ++o) {
                                    const T* wr = wd + ic * ws_c + o * ws_o;
                                    const T* gyc = gy + ni * os_n + o * os_c;
                                    for (int64_t ky = 0; ky < kh; ++ky) {
                                        const int64_t oy = iy * stride - padding + ky;
                                        if (oy < 0 || oy >= oh) continue;
                                        for (int64_t kx = 0; kx < kw; ++kx) {
                                            const int64_t ox = ix * stride - padding + kx;
                                            if (ox < 0 || ox >= ow) continue;
                                            acc += wr[ky * kw + kx] * gyc[oy * ow + ox];
                                        }
                                    }
                                }
                                gxc[iy * win + ix] += acc;
                            }
                        }
                    }
                }
            }
            if (w->needs_grad) {
                w->ensure_grad();
                T* gw = w->grad.data();
                for (int64_t ic = 0; ic < c; ++ic) {
                    for (int64_t o = 0; o < oc; ++o) {
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                T acc = T(0);
                                for (int64_t ni = 0; ni < n; ++ni) {
                                    const T* xc = xd + ni * xs_n + ic * xs_c;
                                    const T* gyc = gy + ni * os_n + o * os_c;
                                    for (int64_t iy = 0; iy < h; ++iy) {
                                        const int64_t oy = iy * stride - padding + ky;
                                        if (oy < 0 || oy >= oh) continue;
                                        for (int64_t ix = 0; ix < win; ++ix) {
                                            const int64_t ox = ix * stride - padding + kx;
                                            if (ox < 0 || ox >= ow) continue;
                                            acc += xc[iy * win + ix] * gyc[oy * ow + ox];
                                        }
                                    }
                                }
                                gw[ic * ws_c + o * ws_o + ky * kw + kx] += acc;
                            }
                        }
                    }
                }
            }
            if (b && b->needs_grad) {
                b->ensure_grad();
                T* gb = b->grad.data();
                for (int64_t ni = 0; ni < n; ++ni)
                    for (int64_t o = 0; o < oc; ++o) {
                        const T* gyc = gy + ni * os_n + o * os_c;
                        T acc = T(0);
                        for (int64_t p = 0; p < os_c; ++p) acc += gyc[p];
                        gb[o] += acc;
                    }
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> batch_norm2d(const TensorPtrT<T>& x, const TensorPtrT<T>& gamma,
                           const TensorPtrT<T>& beta, std::vector<T>& running_mean,
                           std::vector<T>& running_var, bool training, T momentum, T eps) {
    if (x->ndim() != 4) throw ShapeError("batch_norm2d: input must be NCHW");
    const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    if (gamma->numel() != c || beta->numel() != c || static_cast<int64_t>(running_mean.size()) != c ||
        static_cast<int64_t>(running_var.size()) != c)
        throw ShapeError("batch_norm2d: per-channel parameter length must equal channel axis 1 = " +
                         std::to_string(c));

    auto out = TensorT<T>::create(x->shape);
    const int64_t hw = h * w, chw = c * hw;
    const T* xd = x->data.data();
    const T* gd = gamma->data.data();
    const T* bd = beta->data.data();
    T* od = out->data.data();

    std::vector<T> mean(c), inv_std(c);
    if (training) {
        const int64_t count = n * hw;
        for (int64_t ci = 0; ci < c; ++ci) {
            T m = T(0);
            for (int64_t ni = 0; ni < n; ++ni) {
                const T* row = xd + ni * chw + ci * hw;
                for (int64_t p = 0; p < hw; ++p) m += row[p];
            }
            m /= T(count);
            T v = T(0);
            for (int64_t ni = 0; ni < n; ++ni) {
                const T* row = xd + ni * chw + ci * hw;
                for (int64_t p = 0; p < hw; ++p) {
                    const T d = row[p] - m;
                    v += d * d;
                }
            }
            v /= T(count);
            mean[ci] = m;
            inv_std[ci] = T(1) / std::sqrt(v + eps);
            running_mean[ci] = (T(1) - momentum) * running_mean[ci] + momentum * m;
            const T v_run = count > 1 ? v * T(count) / T(count - 1) : v;
            running_var[ci] = (T(1) - momentum) * running_var[ci] + momentum * v_run;
        }
    } else {
        for (int64_t ci = 0; ci < c; ++ci) {
            mean[ci] = running_mean[ci];
            inv_std[ci] = T(1) / std::sqrt(running_var[ci] + eps);
        }
    }

    for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t ci = 0; ci < c; ++ci) {
            const T m = mean[ci], is = inv_std[ci], g = gd[ci], bt = bd[ci];
            const T* row = xd + ni * chw + ci * hw;
            T* orow = od + ni * chw + ci * hw;
            for (int64_t p = 0; p < hw; ++p) orow[p] = g * (row[p] - m) * is + bt;
        }
    }

    if (grad_wanted<T>({&x, &gamma, &beta})) {
        record<T>(out, [x, gamma, beta, out, mean, inv_std, training, n, c, hw, chw]() {
            const T* gy = out->grad.data();
            const T* xd = x->data.data();
            const T* gd = gamma->data.data();
            const int64_t count = n * hw;
            for (int64_t ci = 0; ci < c; ++ci) {
                const T m = mean[ci], is = inv_std[ci];
                T sum_gy = T(0), sum_gy_xhat = T(0);
                for (int64_t ni = 0; ni < n; ++ni) {
                    const T* grow = gy + ni * chw + ci * hw;
                    const T* xrow = xd + ni * chw + ci * hw;
                    for (int64_t p = 0; p < hw; ++p) {
                        sum_gy += grow[p];
                        sum_gy_xhat += grow[p] * (xrow[p] - m) * is;
                    }
                }
                if (gamma->needs_grad) {
                    gamma->ensure_grad();
                    gamma->grad[ci] += sum_gy_xhat;
                }
                if (beta->needs_grad) {
                    beta->ensure_grad();
                    beta->grad[ci] += sum_gy;
                }
                if (x->needs_grad) {
                    x->ensure_grad();
                    T* gx = x->grad.data();
                    const T g = gd[ci];
                    if (training) {
                        // Batch statistics are functions of x; fold their
                        // derivatives into the per-element term.
                        const T inv_count = T(1) / T(count);
                        for (int64_t ni = 0; ni < n; ++ni) {
                            const T* grow = gy + ni * chw + ci * hw;
                            const T* xrow = xd + ni * chw + ci * hw;
                            T* gxrow = gx + ni * chw + ci * hw;
                            for (int64_t p = 0; p < hw; ++p) {
                                const T xhat = (xrow[p] - m) * is;
                                gxrow[p] += g * is * (grow[p] - inv_count * sum_gy - xhat * inv_count * sum_gy_xhat);
                            }
                        }
                    } else {
                        for (int64_t ni = 0; ni < n; ++ni) {
                            const T* grow = gy + ni * chw + ci * hw;
                            T* gxrow = gx + ni * chw + ci * hw;
                            for (int64_t p = 0; p < hw; ++p) gxrow[p] += g * is * grow[p];
                        }
                    }
                }
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> relu(const TensorPtrT<T>& x) {
    auto out = TensorT<T>::create(x->shape);
    const int64_t m = x->numel();
    for (int64_t i = 0; i < m; ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out, m]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            for (int64_t i = 0; i < m; ++i)
                if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> softmax_rows(const TensorPtrT<T>& x) {
    if (x->ndim() < 2) throw ShapeError("softmax_rows: input must have at least 2 dims");
    const int64_t cols = x->dim(x->ndim() - 1);
    const int64_t rows = x->numel() / cols;
    auto out = TensorT<T>::create(x->shape);
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x->data.data() + r * cols;
        T* orow = out->data.data() + r * cols;
        T mx = xr[0];
        for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T sum = T(0);
        for (int64_t j = 0; j < cols; ++j) {
            orow[j] = std::exp(xr[j] - mx);
            sum += orow[j];
        }
        const T inv = T(1) / sum;
        for (int64_t j = 0; j < cols; ++j) orow[j] *= inv;
    }
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out, rows, cols]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const T* z = out->data.data() + r * cols;
                const T* gz = out->grad.data() + r * cols;
                T* gx = x->grad.data() + r * cols;
                T dot = T(0);
                for (int64_t j = 0; j < cols; ++j) dot += gz[j] * z[j];
                for (int64_t j = 0; j < cols; ++j) gx[j] += z[j] * (gz[j] - dot);
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> matmul(const TensorPtrT<T>& a, const TensorPtrT<T>& b, bool transpose_b) {
    const int nd = a->ndim();
    if (nd != 2 && nd != 3) throw ShapeError("matmul: operands must be 2-d or batched 3-d");
    if (b->ndim() != nd) throw ShapeError("matmul: operand ranks differ");
    const int64_t batch = nd == 3 ? a->dim(0) : 1;
    if (nd == 3 && b->dim(0) != batch) throw ShapeError("matmul: batch axis 0 mismatch");
    const int64_t m = a->dim(nd - 2), k = a->dim(nd - 1);
    const int64_t bk = transpose_b ? b->dim(nd - 1) : b->dim(nd - 2);
    const int64_t nn = transpose_b ? b->dim(nd - 2) : b->dim(nd - 1);
    if (bk != k)
        throw ShapeError("matmul: inner dimension mismatch, a has " + std::to_string(k) +
                         " (last axis), b has " + std::to_string(bk));

    std::vector<int64_t> oshape = nd == 3 ? std::vector<int64_t>{batch, m, nn} : std::vector<int64_t>{m, nn};
    auto out = TensorT<T>::create(oshape);
    const int64_t as = m * k, bs = b->numel() / batch, os = m * nn;
    for (int64_t bi = 0; bi < batch; ++bi) {
        const T* ad = a->data.data() + bi * as;
        const T* bd = b->data.data() + bi * bs;
        T* od = out->data.data() + bi * os;
        if (!transpose_b) {
            for (int64_t i = 0; i < m; ++i) {
                T* orow = od + i * nn;
                for (int64_t j = 0; j < nn; ++j) orow[j] = T(0);
                for (int64_t kk = 0; kk < k; ++kk) {
                    const T av = ad[i * k + kk];
                    const T* brow = bd + kk * nn;
                    for (int64_t j = 0; j < nn; ++j) orow[j] += av * brow[j];
                }
            }
        } else {
            for (int64_t i = 0; i < m; ++i) {
                for (int64_t j = 0; j < nn; ++j) {
                    T acc = T(0);
                    const T* arow = ad + i * k;
                    const T* brow = bd + j * k;
                    for (int64_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                    od[i * nn + j] = acc;
                }
            }
        }
    }

    if (grad_wanted<T>({&a, &b})) {
        record<T>(out, [a, b, out, transpose_b, batch, m, k, nn, as, bs, os]() {
            for (int64_t bi = 0; bi < batch; ++bi) {
                const T* gy = out->grad.data() + bi * os;
                const T* ad = a->data.data() + bi * as;
                const T* bd = b->data.data() + bi * bs;
                if (a->needs_grad) {
                    a->ensure_grad();
                    T* ga = a->grad.data() + bi * as;
                    if (!transpose_b) {
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t kk = 0; kk < k; ++kk) {
                                T acc = T(0);
                                const T* grow = gy + i * nn;
                                const T* brow = bd + kk * nn;
                                for (int64_t j = 0; j < nn; ++j) acc += grow[j] * brow[j];
                                ga[i * k + kk] += acc;
                            }
                    } else {
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t j = 0; j < nn; ++j) {
                                const T gv = gy[i * nn + j];
                                const T* brow = bd + j * k;
                                T* garow = ga + i * k;
                                for (int64_t kk = 0; kk < k; ++kk) garow[kk] += gv * brow[kk];
                            }
                    }
                }
                if (b->needs_grad) {
                    b->ensure_grad();
                    T* gb = b->grad.data() + bi * bs;
                    if (!transpose_b) {
                        for (int64_t kk = 0; kk < k; ++kk)
                            for (int64_t i = 0; i < m; ++i) {
                                const T av = ad[i * k + kk];
                                const T* grow = gy + i * nn;
                                T* gbrow = gb + kk * nn;
                                for (int64_t j = 0; j < nn; ++j) gbrow[j] += av * grow[j];
                            }
                    } else {
                        for (int64_t j = 0; j < nn; ++j)
                            for (int64_t i = 0; i < m; ++i) {
                                const T gv = gy[i * nn + j];
                                const T* arow = ad + i * k;
                                T* gbrow = gb + j * k;
                                for (int64_t kk = 0; kk < k; ++kk) gbrow[kk] += gv * arow[kk];
                            }
                    }
                }
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> add(const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    if (a->shape != b->shape) throw ShapeError("add: operand shapes differ");
    auto out = TensorT<T>::create(a->shape);
    const int64_t m = a->numel();
    for (int64_t i = 0; i < m; ++i) out->data[i] = a->data[i] + b->data[i];
    if (grad_wanted<T>({&a, &b})) {
        record<T>(out, [a, b, out, m]() {
            if (a->needs_grad) {
                a->ensure_grad();
                for (int64_t i = 0; i < m; ++i) a->grad[i] += out->grad[i];
            }
            if (b->needs_grad) {
                b->ensure_grad();
                for (int64_t i = 0; i < m; ++i) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> mul_scalar(const TensorPtrT<T>& x, T s) {
    auto out = TensorT<T>::create(x->shape);
    const int64_t m = x->numel();
    for (int64_t i = 0; i < m; ++i) out->data[i] = x->data[i] * s;
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out, s, m]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            for (int64_t i = 0; i < m; ++i) x->grad[i] += s * out->grad[i];
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> sum(const TensorPtrT<T>& x) {
    auto out = TensorT<T>::create({1});
    T acc = T(0);
    for (T v : x->data) acc += v;
    out->data[0] = acc;
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            const T g = out->grad[0];
            for (auto& gv : x->grad) gv += g;
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> concat_channels(const std::vector<TensorPtrT<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input list");
    const int64_t n = xs[0]->dim(0), h = xs[0]->dim(2), w = xs[0]->dim(3);
    int64_t c_total = 0;
    for (const auto& x : xs) {
        if (x->ndim() != 4 || x->dim(0) != n || x->dim(2) != h || x->dim(3) != w)
            throw ShapeError("concat_channels: inputs must agree on axes 0,2,3");
        c_total += x->dim(1);
    }
    auto out = TensorT<T>::create({n, c_total, h, w});
    const int64_t hw = h * w;
    for (int64_t ni = 0; ni < n; ++ni) {
        int64_t co = 0;
        for (const auto& x : xs) {
            const int64_t ci = x->dim(1);
            std::memcpy(out->data.data() + (ni * c_total + co) * hw, x->data.data() + ni * ci * hw,
                        sizeof(T) * static_cast<size_t>(ci * hw));
            co += ci;
        }
    }
    bool track = false;
    if (TapeT<T>::current())
        for (const auto& x : xs)
            if (x->needs_grad) track = true;
    if (track) {
        record<T>(out, [xs, out, n, c_total, hw]() {
            for (int64_t ni = 0; ni < n; ++ni) {
                int64_t co = 0;
                for (const auto& x : xs) {
                    const int64_t ci = x->dim(1);
                    if (x->needs_grad) {
                        x->ensure_grad();
                        const T* gsrc = out->grad.data() + (ni * c_total + co) * hw;
                        T* gdst = x->grad.data() + ni * ci * hw;
                        for (int64_t i = 0; i < ci * hw; ++i) gdst[i] += gsrc[i];
                    }
                    co += ci;
                }
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> reshape(const TensorPtrT<T>& x, std::vector<int64_t> shape) {
    auto out = TensorT<T>::from_values(std::move(shape), x->data);
    if (out->numel() != x->numel())
        throw ShapeError("reshape: element count changes from " + std::to_string(x->numel()) + " to " +
                         std::to_string(out->numel()));
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            const int64_t m = x->numel();
            for (int64_t i = 0; i < m; ++i) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> nchw_to_tokens(const TensorPtrT<T>& x) {
    if (x->ndim() != 4) throw ShapeError("nchw_to_tokens: input must be NCHW");
    const int64_t n = x->dim(0), c = x->dim(1), hw = x->dim(2) * x->dim(3);
    auto out = TensorT<T>::create({n, hw, c});
    for (int64_t ni = 0; ni < n; ++ni) {
        const T* xn = x->data.data() + ni * c * hw;
        T* on = out->data.data() + ni * hw * c;
        for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t p = 0; p < hw; ++p) on[p * c + ci] = xn[ci * hw + p];
    }
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out, n, c, hw]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            for (int64_t ni = 0; ni < n; ++ni) {
                const T* gn = out->grad.data() + ni * hw * c;
                T* gx = x->grad.data() + ni * c * hw;
                for (int64_t ci = 0; ci < c; ++ci)
                    for (int64_t p = 0; p < hw; ++p) gx[ci * hw + p] += gn[p * c + ci];
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> tokens_to_nchw(const TensorPtrT<T>& x, int64_t h, int64_t w) {
    if (x->ndim() != 3) throw ShapeError("tokens_to_nchw: input must be N x tokens x C");
    const int64_t n = x->dim(0), hw = x->dim(1), c = x->dim(2);
    if (hw != h * w)
        throw ShapeError("tokens_to_nchw: token axis 1 is " + std::to_string(hw) + ", expected " +
                         std::to_string(h * w));
    auto out = TensorT<T>::create({n, c, h, w});
    for (int64_t ni = 0; ni < n; ++ni) {
        const T* xn = x->data.data() + ni * hw * c;
        T* on = out->data.data() + ni * c * hw;
        for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t p = 0; p < hw; ++p) on[ci * hw + p] = xn[p * c + ci];
    }
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out, n, c, hw]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            for (int64_t ni = 0; ni < n; ++ni) {
                const T* gn = out->grad.data() + ni * c * hw;
                T* gx = x->grad.data() + ni * hw * c;
                for (int64_t ci = 0; ci < c; ++ci)
                    for (int64_t p = 0; p < hw; ++p) gx[p * c + ci] += gn[ci * hw + p];
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> adaptive_max_pool2d(const TensorPtrT<T>& x, int64_t out_h, int64_t out_w) {
    if (x->ndim() != 4) throw ShapeError("adaptive_max_pool2d: input must be NCHW");
    const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    if (out_h < 1 || out_w < 1)
        throw ShapeError("adaptive_max_pool2d: output size must be at least 1x1");
    if (out_h > h || out_w > w)
        throw ShapeError("adaptive_max_pool2d: output " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " larger than input " + std::to_string(h) + "x" +
                         std::to_string(w) + " (upsampling is not this op)");

    auto out = TensorT<T>::create({n, c, out_h, out_w});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out->numel()));
    const int64_t hw = h * w, ohw = out_h * out_w;
    for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t ci = 0; ci < c; ++ci) {
            const T* plane = x->data.data() + (ni * c + ci) * hw;
            T* oplane = out->data.data() + (ni * c + ci) * ohw;
            int64_t* aplane = argmax->data() + (ni * c + ci) * ohw;
            for (int64_t oy = 0; oy < out_h; ++oy) {
                const int64_t y0 = oy * h / out_h, y1 = (oy + 1) * h / out_h;
                for (int64_t ox = 0; ox < out_w; ++ox) {
                    const int64_t x0 = ox * w / out_w, x1 = (ox + 1) * w / out_w;
                    T best = plane[y0 * w + x0];
                    int64_t besti = y0 * w + x0;
                    for (int64_t y = y0; y < y1; ++y)
                        for (int64_t xx = x0; xx < x1; ++xx) {
                            const int64_t idx = y * w + xx;
                            if (plane[idx] > best) {
                                best = plane[idx];
                                besti = idx;
                            }
                        }
                    oplane[oy * out_w + ox] = best;
                    aplane[oy * out_w + ox] = besti;
                }
            }
        }
    }
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out, argmax, n, c, hw, ohw]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            for (int64_t plane = 0; plane < n * c; ++plane) {
                const T* gy = out->grad.data() + plane * ohw;
                const int64_t* am = argmax->data() + plane * ohw;
                T* gx = x->grad.data() + plane * hw;
                for (int64_t i = 0; i < ohw; ++i) gx[am[i]] += gy[i];
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> upsample_nearest2d(const TensorPtrT<T>& x, int64_t out_h, int64_t out_w) {
    if (x->ndim() != 4) throw ShapeError("upsample_nearest2d: input must be NCHW");
    const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    if (out_h < h || out_w < w)
        throw ShapeError("upsample_nearest2d: output " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " smaller than input " + std::to_string(h) + "x" +
                         std::to_string(w));
    auto out = TensorT<T>::create({n, c, out_h, out_w});
    const int64_t hw = h * w, ohw = out_h * out_w;
    for (int64_t plane = 0; plane < n * c; ++plane) {
        const T* src = x->data.data() + plane * hw;
        T* dst = out->data.data() + plane * ohw;
        for (int64_t oy = 0; oy < out_h; ++oy) {
            const int64_t sy = oy * h / out_h;
            for (int64_t ox = 0; ox < out_w; ++ox) dst[oy * out_w + ox] = src[sy * w + ox * w / out_w];
        }
    }
    if (grad_wanted<T>({&x})) {
        record<T>(out, [x, out, n, c, h, w, out_h, out_w, hw, ohw]() {
            if (!x->needs_grad) return;
            x->ensure_grad();
            for (int64_t plane = 0; plane < n * c; ++plane) {
                const T* gy = out->grad.data() + plane * ohw;
                T* gx = x->grad.data() + plane * hw;
                for (int64_t oy = 0; oy < out_h; ++oy) {
                    const int64_t sy = oy * h / out_h;
                    for (int64_t ox = 0; ox < out_w; ++ox) gx[sy * w + ox * w / out_w] += gy[oy * out_w + ox];
                }
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> mse_loss(const TensorPtrT<T>& pred, const TensorPtrT<T>& target) {
    if (pred->shape != target->shape) throw ShapeError("mse_loss: shapes differ");
    const int64_t m = pred->numel();
    T acc = T(0);
    for (int64_t i = 0; i < m; ++i) {
        const T d = pred->data[i] - target->data[i];
        acc += d * d;
    }
    auto out = TensorT<T>::scalar(acc / T(m));
    if (grad_wanted<T>({&pred, &target})) {
        record<T>(out, [pred, target, out, m]() {
            const T g = out->grad[0] * T(2) / T(m);
            if (pred->needs_grad) {
                pred->ensure_grad();
                for (int64_t i = 0; i < m; ++i) pred->grad[i] += g * (pred->data[i] - target->data[i]);
            }
            if (target->needs_grad) {
                target->ensure_grad();
                for (int64_t i = 0; i < m; ++i) target->grad[i] -= g * (pred->data[i] - target->data[i]);
            }
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> bce_with_sigmoid(const TensorPtrT<T>& logit, T label) {
    if (label != T(0) && label != T(1))
        throw ShapeError("bce_with_sigmoid: label must be 0 or 1");
    const int64_t m = logit->numel();
    T acc = T(0);
    for (int64_t i = 0; i < m; ++i) {
        const T l = logit->data[i];
        acc += std::max(l, T(0)) - label * l + std::log1p(std::exp(-std::abs(l)));
    }
    auto out = TensorT<T>::scalar(acc / T(m));
    if (grad_wanted<T>({&logit})) {
        record<T>(out, [logit, out, label, m]() {
            if (!logit->needs_grad) return;
            logit->ensure_grad();
            const T g = out->grad[0] / T(m);
            for (int64_t i = 0; i < m; ++i)
                logit->grad[i] += g * (stable_sigmoid(logit->data[i]) - label);
        });
    }
    return out;
}

template <class T>
TensorPtrT<T> detach(const TensorPtrT<T>& x) {
    auto out = TensorT<T>::create(x->shape);
    out->data = x->data;
    return out;
}

template <class T>
bool all_finite(const TensorPtrT<T>& x) {
    for (T v : x->data)
        if (!std::isfinite(v)) return false;
    return true;
}

#define VADKD_INSTANTIATE_OPS(T)                                                                      \
    template TensorPtrT<T> conv2d<T>(const TensorPtrT<T>&, const TensorPtrT<T>&, const TensorPtrT<T>&, \
                                     int, int, int);                                                  \
    template TensorPtrT<T> conv_transpose2d<T>(const TensorPtrT<T>&, const TensorPtrT<T>&,            \
                                               const TensorPtrT<T>&, int, int);                       \
    template TensorPtrT<T> batch_norm2d<T>(const TensorPtrT<T>&, const TensorPtrT<T>&,                \
                                           const TensorPtrT<T>&, std::vector<T>&, std::vector<T>&,    \
                                           bool, T, T);                                               \
    template TensorPtrT<T> relu<T>(const TensorPtrT<T>&);                                             \
    template TensorPtrT<T> softmax_rows<T>(const TensorPtrT<T>&);                                     \
    template TensorPtrT<T> matmul<T>(const TensorPtrT<T>&, const TensorPtrT<T>&, bool);               \
    template TensorPtrT<T> add<T>(const TensorPtrT<T>&, const TensorPtrT<T>&);                        \
    template TensorPtrT<T> mul_scalar<T>(const TensorPtrT<T>&, T);                                    \
    template TensorPtrT<T> sum<T>(const TensorPtrT<T>&);                                              \
    template TensorPtrT<T> concat_channels<T>(const std::vector<TensorPtrT<T>>&);                     \
    template TensorPtrT<T> reshape<T>(const TensorPtrT<T>&, std::vector<int64_t>);                    \
    template TensorPtrT<T> nchw_to_tokens<T>(const TensorPtrT<T>&);                                   \
    template TensorPtrT<T> tokens_to_nchw<T>(const TensorPtrT<T>&, int64_t, int64_t);                 \
    template TensorPtrT<T> adaptive_max_pool2d<T>(const TensorPtrT<T>&, int64_t, int64_t);            \
    template TensorPtrT<T> upsample_nearest2d<T>(const TensorPtrT<T>&, int64_t, int64_t);             \
    template TensorPtrT<T> mse_loss<T>(const TensorPtrT<T>&, const TensorPtrT<T>&);                   \
    template TensorPtrT<T> bce_with_sigmoid<T>(const TensorPtrT<T>&, T);                              \
    template TensorPtrT<T> detach<T>(const TensorPtrT<T>&);                                           \
    template bool all_finite<T>(const TensorPtrT<T>&);

VADKD_INSTANTIATE_OPS(float)
VADKD_INSTANTIATE_OPS(double)

#undef VADKD_INSTANTIATE_OPS

}  // namespace vadkd
