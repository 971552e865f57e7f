#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vadkd/nn.hpp"

namespace vadkd {

enum class FfnKind { pointwise, dense };

// Architecture hyperparameters. Defaults are the reference configuration:
// five downsampling convolutions ending at 256 channels, m=5 transformer
// blocks with s=5 heads of width d=64, and three heads emitting 1x1, 4x4 and
// 16x16 anomaly maps from 64x64 inputs.
struct ModelConfig {
    int m = 5;
    int s = 5;
    int d = 64;
    int c = 256;
    std::vector<std::pair<int, int>> head_resolutions = {{1, 1}, {4, 4}, {16, 16}};
    int input_frames = 3;
    int frame_channels = 1;
    int input_h = 64;
    int input_w = 64;
    FfnKind ffn_kind = FfnKind::pointwise;
    std::vector<int> downsample_filters = {16, 32, 64, 128, 256};

    int r() const { return static_cast<int>(head_resolutions.size()); }
    int in_channels() const { return input_frames * frame_channels; }
    void validate() const;
};

// One anomaly map per output head; map k has shape N x 1 x h_k x w_k and is
// non-negative (heads end in ReLU).
template <class T>
struct MapSetT {
    std::vector<TensorPtrT<T>> maps;
};

// Wall-clock split of an eval forward pass, for the throughput benchmark.
struct StageTimes {
    double downsample_s = 0;
    double transformer_s = 0;
    double heads_s = 0;
};

// Q/K/V convolutional projection: depthwise 3x3 (stride 1 for Q, stride 2 for
// K/V, padding 1 in both cases), batch norm, then a pointwise projection to
// width d. Output is the flattened token matrix N x (h'*w') x d.
template <class T>
struct ConvProjectionT {
    Conv2dT<T> dw;
    BatchNorm2dT<T> bn;
    Conv2dT<T> pw;

    TensorPtrT<T> forward(const TensorPtrT<T>& p, bool training);
    void register_params(ParamStoreT<T>& store, const std::string& prefix);
};

// Eq. Z = softmax(Q K^T / sqrt(d)) V on token matrices (2-d or batched 3-d);
// d is taken from Q's last axis.
template <class T>
TensorPtrT<T> self_attention(const TensorPtrT<T>& q, const TensorPtrT<T>& k, const TensorPtrT<T>& v);

template <class T>
struct AttentionHeadT {
    ConvProjectionT<T> q, k, v;
};

template <class T>
struct CvtBlockT {
    std::vector<AttentionHeadT<T>> heads;
    Conv2dT<T> proj;  // pointwise d*s -> c
    BatchNorm2dT<T> bn;
    FfnKind ffn_kind = FfnKind::pointwise;
    // Pointwise FFN: 1x1 convs c -> 4c -> c applied per location.
    // Dense FFN: the same two layers without weight sharing across locations,
    // i.e. 1x1 convs over the flattened (c*h*w)-vector.
    Conv2dT<T> ffn1, ffn2;

    TensorPtrT<T> forward(const TensorPtrT<T>& p, bool training);
    void register_params(ParamStoreT<T>& store, const std::string& prefix);
    int64_t ffn_param_count() const { return ffn1.w->numel() + ffn1.b->numel() + ffn2.w->numel() + ffn2.b->numel(); }
};

template <class T>
struct OutputHeadT {
    Conv2dT<T> conv0, conv1;
    int out_h = 1, out_w = 1;

    TensorPtrT<T> forward(const TensorPtrT<T>& x) const;
    void register_params(ParamStoreT<T>& store, const std::string& prefix);
};

template <class T>
struct StudentModelT {
    ModelConfig cfg;
    int64_t enc_h = 0, enc_w = 0;
    std::vector<Conv2dT<T>> enc_convs;
    std::vector<BatchNorm2dT<T>> enc_bns;
    std::vector<CvtBlockT<T>> blocks;
    std::vector<OutputHeadT<T>> heads;

    // Downsampling block + transformer; the AE latent.
    TensorPtrT<T> encode(const TensorPtrT<T>& x, bool training, StageTimes* times = nullptr);
    MapSetT<T> forward(const TensorPtrT<T>& x, bool training, StageTimes* times = nullptr);

    ParamStoreT<T> encoder_store();
    ParamStoreT<T> head_store();
    ParamStoreT<T> full_store();
    int64_t param_count();
};

// Transposed-convolution mirror of the downsampling block. Kernel sizes are
// derived per layer so each stage exactly inverts the encoder's spatial
// chain; construction fails if no kernel in [2, 9] can do so.
template <class T>
struct DecoderT {
    std::vector<ConvTranspose2dT<T>> convs;
    std::vector<BatchNorm2dT<T>> bns;  // one per conv except the last

    TensorPtrT<T> forward(const TensorPtrT<T>& latent, bool training);
    ParamStoreT<T> store();
};

// Parameters drawn from derive_seed(seed, "student") in construction order.
template <class T>
StudentModelT<T> build_student(const ModelConfig& cfg, uint64_t seed);

template <class T>
DecoderT<T> build_decoder(const ModelConfig& cfg, uint64_t seed);

// Pool down or replicate up to (out_h, out_w); both directions preserve the
// map's maximum. Used by the output heads and the discriminator fusion.
template <class T>
TensorPtrT<T> resample_to(const TensorPtrT<T>& x, int64_t out_h, int64_t out_w);

// Spatial sizes of the encoder chain for a given config: {input, after
// conv0, ..., after conv_last}. Throws ShapeError naming the failing layer
// if any stage collapses below 1x1.
std::vector<std::pair<int64_t, int64_t>> encoder_spatial_chain(const ModelConfig& cfg);

}  // namespace vadkd
