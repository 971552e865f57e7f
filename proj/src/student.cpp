#include "vadkd/student.hpp"

#include <chrono>
#include <cmath>

namespace vadkd {

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

void ModelConfig::validate() const {
    if (m < 1 || s < 1 || d < 1 || c < 1) throw ShapeError("model config: m, s, d, c must be positive");
    if (input_frames < 1 || frame_channels < 1)
        throw ShapeError("model config: input_frames and frame_channels must be positive");
    if (downsample_filters.empty()) throw ShapeError("model config: downsample_filters is empty");
    if (downsample_filters.back() != c)
        throw ShapeError("model config: c = " + std::to_string(c) + " must equal the last downsampling filter count " +
                         std::to_string(downsample_filters.back()));
    if (head_resolutions.empty()) throw ShapeError("model config: at least one output head required");
    int64_t prev_area = 0;
    for (auto [h, w] : head_resolutions) {
        if (h < 1 || w < 1) throw ShapeError("model config: head resolutions must be positive");
        const int64_t area = int64_t(h) * w;
        if (area <= prev_area)
            throw ShapeError("model config: head resolutions must be strictly increasing in area");
        prev_area = area;
    }
}

std::vector<std::pair<int64_t, int64_t>> encoder_spatial_chain(const ModelConfig& cfg) {
    std::vector<std::pair<int64_t, int64_t>> chain;
    int64_t h = cfg.input_h, w = cfg.input_w;
    chain.emplace_back(h, w);
    for (size_t i = 0; i < cfg.downsample_filters.size(); ++i) {
        const int64_t k = i == 0 ? 7 : 3;
        const int stride = i == 0 ? 1 : 2;
        const int pad = i == 0 ? 0 : 1;
        const int64_t nh = conv_out_size(h, k, stride, pad);
        const int64_t nw = conv_out_size(w, k, stride, pad);
        if (nh < 1 || nw < 1 || h + 2 * pad < k || w + 2 * pad < k)
            throw ShapeError("build_student: input " + std::to_string(cfg.input_h) + "x" +
                             std::to_string(cfg.input_w) + " collapses at layer enc.conv" + std::to_string(i) +
                             " (" + std::to_string(k) + "x" + std::to_string(k) + " stride " +
                             std::to_string(stride) + ")");
        h = nh;
        w = nw;
        chain.emplace_back(h, w);
    }
    return chain;
}

template <class T>
TensorPtrT<T> resample_to(const TensorPtrT<T>& x, int64_t out_h, int64_t out_w) {
    const int64_t h = x->dim(2), w = x->dim(3);
    if (out_h == h && out_w == w) return adaptive_max_pool2d<T>(x, out_h, out_w);
    if (out_h <= h && out_w <= w) return adaptive_max_pool2d<T>(x, out_h, out_w);
    if (out_h >= h && out_w >= w) return upsample_nearest2d<T>(x, out_h, out_w);
    throw ShapeError("resample_to: target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " straddles input " + std::to_string(h) + "x" + std::to_string(w));
}

template <class T>
TensorPtrT<T> ConvProjectionT<T>::forward(const TensorPtrT<T>& p, bool training) {
    auto y = dw.forward(p);
    y = bn.forward(y, training);
    y = pw.forward(y);
    return nchw_to_tokens<T>(y);
}

template <class T>
void ConvProjectionT<T>::register_params(ParamStoreT<T>& store, const std::string& prefix) {
    dw.register_params(store, prefix + ".dw");
    bn.register_params(store, prefix + ".bn");
    pw.register_params(store, prefix + ".pw");
}

template <class T>
TensorPtrT<T> self_attention(const TensorPtrT<T>& q, const TensorPtrT<T>& k, const TensorPtrT<T>& v) {
    const int nd = q->ndim();
    if (k->dim(nd - 1) != q->dim(nd - 1))
        throw ShapeError("self_attention: Q and K widths differ");
    if (k->dim(nd - 2) != v->dim(nd - 2))
        throw ShapeError("self_attention: K and V token counts differ");
    const T scale = T(1) / std::sqrt(T(q->dim(nd - 1)));
    auto scores = mul_scalar<T>(matmul<T>(q, k, /*transpose_b=*/true), scale);
    return matmul<T>(softmax_rows<T>(scores), v);
}

template <class T>
TensorPtrT<T> CvtBlockT<T>::forward(const TensorPtrT<T>& p, bool training) {
    const int64_t h = p->dim(2), w = p->dim(3);
    std::vector<TensorPtrT<T>> zs;
    zs.reserve(heads.size());
    for (auto& head : heads) {
        auto q = head.q.forward(p, training);
        auto k = head.k.forward(p, training);
        auto v = head.v.forward(p, training);
        zs.push_back(tokens_to_nchw<T>(self_attention<T>(q, k, v), h, w));
    }
    auto zstar = add<T>(proj.forward(concat_channels<T>(zs)), p);
    auto y = bn.forward(zstar, training);
    TensorPtrT<T> f;
    if (ffn_kind == FfnKind::pointwise) {
        f = ffn2.forward(ffn1.forward(y));
    } else {
        // Dense variant: the two layers act on the flattened c*h*w vector, so
        // every spatial location gets its own weights.
        const int64_t n = y->dim(0), c = y->dim(1);
        auto flat = reshape<T>(y, {n, c * h * w, 1, 1});
        auto hidden = ffn1.forward(flat);
        f = reshape<T>(ffn2.forward(hidden), {n, c, h, w});
    }
    return add<T>(f, zstar);
}

template <class T>
void CvtBlockT<T>::register_params(ParamStoreT<T>& store, const std::string& prefix) {
    for (size_t i = 0; i < heads.size(); ++i) {
        const std::string hp = prefix + ".head" + std::to_string(i);
        heads[i].q.register_params(store, hp + ".q");
        heads[i].k.register_params(store, hp + ".k");
        heads[i].v.register_params(store, hp + ".v");
    }
    proj.register_params(store, prefix + ".proj");
    bn.register_params(store, prefix + ".bn");
    ffn1.register_params(store, prefix + ".ffn1");
    ffn2.register_params(store, prefix + ".ffn2");
}

template <class T>
TensorPtrT<T> OutputHeadT<T>::forward(const TensorPtrT<T>& x) const {
    auto y = relu<T>(conv0.forward(x));
    y = relu<T>(conv1.forward(y));
    return resample_to<T>(y, out_h, out_w);
}

template <class T>
void OutputHeadT<T>::register_params(ParamStoreT<T>& store, const std::string& prefix) {
    conv0.register_params(store, prefix + ".conv0");
    conv1.register_params(store, prefix + ".conv1");
}

template <class T>
TensorPtrT<T> StudentModelT<T>::encode(const TensorPtrT<T>& x, bool training, StageTimes* times) {
    if (x->ndim() != 4 || x->dim(1) != cfg.in_channels())
        throw ShapeError("student: expected " + std::to_string(cfg.input_frames) + " frames x " +
                         std::to_string(cfg.frame_channels) + " channels = " +
                         std::to_string(cfg.in_channels()) + " input channels, got " +
                         std::to_string(x->ndim() == 4 ? x->dim(1) : -1));
    if (x->dim(2) != cfg.input_h || x->dim(3) != cfg.input_w)
        throw ShapeError("student: expected " + std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w) +
                         " input, got " + std::to_string(x->dim(2)) + "x" + std::to_string(x->dim(3)));
    double t0 = times ? now_s() : 0;
    auto y = x;
    for (size_t i = 0; i < enc_convs.size(); ++i) {
        y = relu<T>(enc_bns[i].forward(enc_convs[i].forward(y), training));
    }
    if (times) {
        times->downsample_s += now_s() - t0;
        t0 = now_s();
    }
    for (auto& block : blocks) y = block.forward(y, training);
    if (times) times->transformer_s += now_s() - t0;
    return y;
}

template <class T>
MapSetT<T> StudentModelT<T>::forward(const TensorPtrT<T>& x, bool training, StageTimes* times) {
    auto p = encode(x, training, times);
    const double t0 = times ? now_s() : 0;
    MapSetT<T> out;
    out.maps.reserve(heads.size());
    for (auto& head : heads) out.maps.push_back(head.forward(p));
    if (times) times->heads_s += now_s() - t0;
    return out;
}

template <class T>
ParamStoreT<T> StudentModelT<T>::encoder_store() {
    ParamStoreT<T> store;
    for (size_t i = 0; i < enc_convs.size(); ++i) {
        enc_convs[i].register_params(store, "enc.conv" + std::to_string(i));
        enc_bns[i].register_params(store, "enc.bn" + std::to_string(i));
    }
    for (size_t i = 0; i < blocks.size(); ++i) blocks[i].register_params(store, "blk" + std::to_string(i));
    return store;
}

template <class T>
ParamStoreT<T> StudentModelT<T>::head_store() {
    ParamStoreT<T> store;
    for (size_t i = 0; i < heads.size(); ++i) heads[i].register_params(store, "head" + std::to_string(i));
    return store;
}

template <class T>
ParamStoreT<T> StudentModelT<T>::full_store() {
    ParamStoreT<T> store = encoder_store();
    ParamStoreT<T> hs = head_store();
    for (auto& p : hs.params) store.params.push_back(p);
    for (auto& b : hs.buffers) store.buffers.push_back(b);
    return store;
}

template <class T>
int64_t StudentModelT<T>::param_count() {
    int64_t n = 0;
    for (const auto& [name, t] : full_store().params) n += t->numel();
    return n;
}

template <class T>
StudentModelT<T> build_student(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    const auto chain = encoder_spatial_chain(cfg);
    StudentModelT<T> model;
    model.cfg = cfg;
    model.enc_h = chain.back().first;
    model.enc_w = chain.back().second;

    Rng rng(derive_seed(seed, "student"));
    int64_t in_ch = cfg.in_channels();
    for (size_t i = 0; i < cfg.downsample_filters.size(); ++i) {
        const int64_t k = i == 0 ? 7 : 3;
        const int stride = i == 0 ? 1 : 2;
        const int pad = i == 0 ? 0 : 1;
        model.enc_convs.emplace_back(in_ch, cfg.downsample_filters[i], k, stride, pad, 1, rng);
        model.enc_bns.emplace_back(cfg.downsample_filters[i]);
        in_ch = cfg.downsample_filters[i];
    }

    const int64_t hw = model.enc_h * model.enc_w;
    for (int bi = 0; bi < cfg.m; ++bi) {
        CvtBlockT<T> block;
        block.ffn_kind = cfg.ffn_kind;
        for (int hi = 0; hi < cfg.s; ++hi) {
            AttentionHeadT<T> head;
            auto make_proj = [&](int stride) {
                ConvProjectionT<T> proj;
                proj.dw = Conv2dT<T>(cfg.c, cfg.c, 3, stride, 1, cfg.c, rng);
                proj.bn = BatchNorm2dT<T>(cfg.c);
                proj.pw = Conv2dT<T>(cfg.c, cfg.d, 1, 1, 0, 1, rng);
                return proj;
            };
            head.q = make_proj(1);
            head.k = make_proj(2);
            head.v = make_proj(2);
            block.heads.push_back(std::move(head));
        }
        block.proj = Conv2dT<T>(int64_t(cfg.d) * cfg.s, cfg.c, 1, 1, 0, 1, rng);
        block.bn = BatchNorm2dT<T>(cfg.c);
        if (cfg.ffn_kind == FfnKind::pointwise) {
            block.ffn1 = Conv2dT<T>(cfg.c, int64_t(4) * cfg.c, 1, 1, 0, 1, rng);
            block.ffn2 = Conv2dT<T>(int64_t(4) * cfg.c, cfg.c, 1, 1, 0, 1, rng);
        } else {
            block.ffn1 = Conv2dT<T>(cfg.c * hw, int64_t(4) * cfg.c * hw, 1, 1, 0, 1, rng);
            block.ffn2 = Conv2dT<T>(int64_t(4) * cfg.c * hw, cfg.c * hw, 1, 1, 0, 1, rng);
        }
        model.blocks.push_back(std::move(block));
    }

    for (auto [h, w] : cfg.head_resolutions) {
        OutputHeadT<T> head;
        head.conv0 = Conv2dT<T>(cfg.c, 64, 3, 1, 1, 1, rng);
        head.conv1 = Conv2dT<T>(64, 1, 3, 1, 1, 1, rng);
        head.out_h = h;
        head.out_w = w;
        model.heads.push_back(std::move(head));
    }
    return model;
}

template <class T>
TensorPtrT<T> DecoderT<T>::forward(const TensorPtrT<T>& latent, bool training) {
    auto y = latent;
    for (size_t i = 0; i < convs.size(); ++i) {
        y = convs[i].forward(y);
        if (i + 1 < convs.size()) y = relu<T>(bns[i].forward(y, training));
    }
    return y;
}

template <class T>
ParamStoreT<T> DecoderT<T>::store() {
    ParamStoreT<T> store;
    for (size_t i = 0; i < convs.size(); ++i) {
        convs[i].register_params(store, "dec.conv" + std::to_string(i));
        if (i + 1 < convs.size()) bns[i].register_params(store, "dec.bn" + std::to_string(i));
    }
    return store;
}

template <class T>
DecoderT<T> build_decoder(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    const auto chain = encoder_spatial_chain(cfg);
    DecoderT<T> dec;
    Rng rng(derive_seed(seed, "decoder"));

    const size_t layers = cfg.downsample_filters.size();
    for (size_t i = 0; i < layers; ++i) {
        // Mirror encoder layer (layers-1-i): invert its spatial step exactly.
        const size_t ei = layers - 1 - i;
        const int stride = ei == 0 ? 1 : 2;
        const int pad = ei == 0 ? 0 : 1;
        const auto [th, tw] = chain[ei];      // target (encoder input of that layer)
        const auto [sh, sw] = chain[ei + 1];  // source (encoder output of that layer)
        const int64_t kh = th - (sh - 1) * stride + 2 * pad;
        const int64_t kw = tw - (sw - 1) * stride + 2 * pad;
        if (kh < stride || kw < stride || kh > 9 || kw > 9)
            throw ShapeError("build_decoder: no transposed-conv kernel inverts enc.conv" + std::to_string(ei) +
                             " (" + std::to_string(sh) + "x" + std::to_string(sw) + " -> " + std::to_string(th) +
                             "x" + std::to_string(tw) + ")");
        const int64_t in_ch = cfg.downsample_filters[ei];
        const int64_t out_ch = ei == 0 ? cfg.frame_channels : cfg.downsample_filters[ei - 1];
        dec.convs.emplace_back(in_ch, out_ch, kh, kw, stride, pad, rng);
        if (i + 1 < layers) dec.bns.emplace_back(out_ch);
    }
    return dec;
}

template TensorPtrT<float> resample_to<float>(const TensorPtrT<float>&, int64_t, int64_t);
template TensorPtrT<double> resample_to<double>(const TensorPtrT<double>&, int64_t, int64_t);
template TensorPtrT<float> self_attention<float>(const TensorPtrT<float>&, const TensorPtrT<float>&,
                                                 const TensorPtrT<float>&);
template TensorPtrT<double> self_attention<double>(const TensorPtrT<double>&, const TensorPtrT<double>&,
                                                   const TensorPtrT<double>&);
template struct ConvProjectionT<float>;
template struct ConvProjectionT<double>;
template struct CvtBlockT<float>;
template struct CvtBlockT<double>;
template struct OutputHeadT<float>;
template struct OutputHeadT<double>;
template struct StudentModelT<float>;
template struct StudentModelT<double>;
template struct DecoderT<float>;
template struct DecoderT<double>;
template StudentModelT<float> build_student<float>(const ModelConfig&, uint64_t);
template StudentModelT<double> build_student<double>(const ModelConfig&, uint64_t);
template DecoderT<float> build_decoder<float>(const ModelConfig&, uint64_t);
template DecoderT<double> build_decoder<double>(const ModelConfig&, uint64_t);

}  // namespace vadkd
