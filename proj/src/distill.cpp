#include "vadkd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vadkd/metrics.hpp"

namespace vadkd {

void TrainConfig::validate(size_t n_teachers) const {
    if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
    if (temporal_stride < 1) throw std::invalid_argument("train config: temporal stride t must be >= 1");
    if (alpha < 0) throw std::invalid_argument("train config: alpha must be >= 0");
    if (d_steps_per_s_step < 1)
        throw std::invalid_argument("train config: d_steps_per_s_step must be >= 1");
    if (n_teachers > 0 && lambdas.size() != n_teachers)
        throw std::invalid_argument("train config: " + std::to_string(lambdas.size()) + " lambdas for " +
                                    std::to_string(n_teachers) + " teachers");
    for (double l : lambdas)
        if (l < 0) throw std::invalid_argument("train config: lambdas must be >= 0");
}

// --- Discriminator ---

template <class T>
TensorPtrT<T> DiscriminatorT<T>::forward(const MapSetT<T>& maps) const {
    if (maps.maps.size() != resolutions.size())
        throw ShapeError("discriminator: got " + std::to_string(maps.maps.size()) + " maps, configured for " +
                         std::to_string(resolutions.size()));
    for (size_t i = 0; i < maps.maps.size(); ++i) {
        if (maps.maps[i]->dim(2) != resolutions[i].first || maps.maps[i]->dim(3) != resolutions[i].second)
            throw ShapeError("discriminator: map " + std::to_string(i) + " is " +
                             std::to_string(maps.maps[i]->dim(2)) + "x" + std::to_string(maps.maps[i]->dim(3)) +
                             ", configured " + std::to_string(resolutions[i].first) + "x" +
                             std::to_string(resolutions[i].second));
    }
    const size_t r = maps.maps.size();
    auto y = relu<T>(conv0.forward(maps.maps[r - 1]));
    y = relu<T>(conv1.forward(y));
    if (r > 2) {
        std::vector<TensorPtrT<T>> stage{y};
        for (size_t i = r - 2; i >= 1; --i)
            stage.push_back(resample_to<T>(maps.maps[i], y->dim(2), y->dim(3)));
        y = concat_channels<T>(stage);
    }
    y = relu<T>(conv2.forward(y));
    y = adaptive_max_pool2d<T>(y, 1, 1);
    if (r > 1) y = concat_channels<T>({y, resample_to<T>(maps.maps[0], 1, 1)});
    return fuse.forward(y);
}

template <class T>
ParamStoreT<T> DiscriminatorT<T>::store(const std::string& prefix) {
    ParamStoreT<T> s;
    conv0.register_params(s, prefix + ".conv0");
    conv1.register_params(s, prefix + ".conv1");
    conv2.register_params(s, prefix + ".conv2");
    fuse.register_params(s, prefix + ".fuse");
    return s;
}

template <class T>
DiscriminatorT<T> build_discriminator(const std::vector<std::pair<int, int>>& head_resolutions,
                                      uint64_t seed) {
    if (head_resolutions.empty()) throw ShapeError("discriminator: no head resolutions");
    DiscriminatorT<T> d;
    d.resolutions = head_resolutions;
    Rng rng(seed);
    const size_t r = head_resolutions.size();
    const int64_t mid = r > 2 ? static_cast<int64_t>(r) - 2 : 0;
    d.conv0 = Conv2dT<T>(1, 16, 3, 2, 1, 1, rng);
    d.conv1 = Conv2dT<T>(16, 32, 3, 2, 1, 1, rng);
    d.conv2 = Conv2dT<T>(32 + mid, 64, 3, 2, 1, 1, rng);
    d.fuse = Conv2dT<T>(r > 1 ? 65 : 64, 1, 1, 1, 0, 1, rng);
    return d;
}

// --- Losses ---

template <class T>
TensorPtrT<T> loss_kd_single(const MapSetT<T>& target, const MapSetT<T>& pred) {
    if (target.maps.size() != pred.maps.size())
        throw ShapeError("loss_kd: target has " + std::to_string(target.maps.size()) + " maps, prediction " +
                         std::to_string(pred.maps.size()));
    TensorPtrT<T> acc;
    for (size_t k = 0; k < pred.maps.size(); ++k) {
        if (target.maps[k]->shape != pred.maps[k]->shape)
            throw ShapeError("loss_kd: resolution mismatch at map " + std::to_string(k));
        auto term = mse_loss<T>(pred.maps[k], target.maps[k]);
        acc = acc ? add<T>(acc, term) : term;
    }
    return acc;
}

template <class T>
TensorPtrT<T> loss_kd_total(const std::vector<MapSetT<T>>& teacher_maps, const MapSetT<T>& pred,
                            const std::vector<double>& lambdas) {
    if (teacher_maps.size() != lambdas.size())
        throw ShapeError("loss_kd_total: " + std::to_string(lambdas.size()) + " lambdas for " +
                         std::to_string(teacher_maps.size()) + " teachers");
    TensorPtrT<T> acc = TensorT<T>::scalar(T(0));
    for (size_t i = 0; i < teacher_maps.size(); ++i)
        acc = add<T>(acc, mul_scalar<T>(loss_kd_single<T>(teacher_maps[i], pred), T(lambdas[i])));
    return acc;
}

template <class T>
TensorPtrT<T> loss_akd_single(const DiscriminatorT<T>& d, const MapSetT<T>& teacher_maps,
                              const MapSetT<T>& student_maps, AkdSide side, GanForm form) {
    if (side == AkdSide::discriminator) {
        MapSetT<T> frozen;
        for (const auto& m : student_maps.maps) frozen.maps.push_back(detach<T>(m));
        auto real_term = bce_with_sigmoid<T>(d.forward(teacher_maps), T(1));
        auto fake_term = bce_with_sigmoid<T>(d.forward(frozen), T(0));
        return add<T>(real_term, fake_term);
    }
    auto logit = d.forward(student_maps);
    if (form == GanForm::non_saturating) return bce_with_sigmoid<T>(logit, T(1));
    // Saturating: minimize log(1 - sigmoid(logit)) = -BCE(logit, 0).
    return mul_scalar<T>(bce_with_sigmoid<T>(logit, T(0)), T(-1));
}

template <class T>
TensorPtrT<T> loss_akd_total(const std::vector<DiscriminatorT<T>>& ds,
                             const std::vector<MapSetT<T>>& teacher_map_sets,
                             const MapSetT<T>& student_maps, AkdSide side, GanForm form) {
    if (ds.size() != teacher_map_sets.size())
        throw ShapeError("loss_akd_total: " + std::to_string(ds.size()) + " discriminators for " +
                         std::to_string(teacher_map_sets.size()) + " teachers");
    TensorPtrT<T> acc = TensorT<T>::scalar(T(0));
    for (size_t i = 0; i < ds.size(); ++i)
        acc = add<T>(acc, loss_akd_single<T>(ds[i], teacher_map_sets[i], student_maps, side, form));
    return acc;
}

// --- Batch assembly ---

std::vector<SequenceRef> valid_sequences(const std::vector<LoadedVideo>& videos, int input_frames,
                                         int t) {
    const int reach = input_frames / 2;
    std::vector<SequenceRef> refs;
    for (size_t vi = 0; vi < videos.size(); ++vi) {
        const int len = static_cast<int>(videos[vi].frames.size());
        for (int c = reach * t; c + reach * t < len; ++c)
            refs.push_back(SequenceRef{static_cast<int>(vi), c});
    }
    return refs;
}

template <class T>
TensorPtrT<T> assemble_batch(const std::vector<LoadedVideo>& videos,
                             const std::vector<SequenceRef>& refs, const ModelConfig& cfg, int t,
                             bool clamp) {
    if (refs.empty()) throw std::invalid_argument("assemble_batch: empty batch");
    const int64_t b = static_cast<int64_t>(refs.size());
    const int64_t h = cfg.input_h, w = cfg.input_w, hw = h * w;
    const int reach = cfg.input_frames / 2;
    auto x = TensorT<T>::create({b, cfg.in_channels(), h, w});
    for (int64_t bi = 0; bi < b; ++bi) {
        const auto& video = videos[static_cast<size_t>(refs[static_cast<size_t>(bi)].video)];
        if (video.height != cfg.input_h || video.width != cfg.input_w)
            throw std::invalid_argument("assemble_batch: clip " + video.id + " is " +
                                        std::to_string(video.height) + "x" + std::to_string(video.width) +
                                        ", model expects " + std::to_string(cfg.input_h) + "x" +
                                        std::to_string(cfg.input_w));
        const int len = static_cast<int>(video.frames.size());
        for (int fi = 0; fi < cfg.input_frames; ++fi) {
            int idx = refs[static_cast<size_t>(bi)].center + (fi - reach) * t;
            if (clamp) idx = std::clamp(idx, 0, len - 1);
            if (idx < 0 || idx >= len)
                throw std::invalid_argument("assemble_batch: context frame " + std::to_string(idx) +
                                            " outside clip of " + std::to_string(len));
            const auto& frame = video.frames[static_cast<size_t>(idx)];
            T* dst = x->data.data() + (bi * cfg.in_channels() + fi) * hw;
            for (int64_t p = 0; p < hw; ++p) dst[p] = static_cast<T>(frame[static_cast<size_t>(p)]);
        }
    }
    return x;
}

template <class T>
TensorPtrT<T> center_frames(const std::vector<LoadedVideo>& videos,
                            const std::vector<SequenceRef>& refs, const ModelConfig& cfg) {
    const int64_t b = static_cast<int64_t>(refs.size());
    const int64_t hw = int64_t(cfg.input_h) * cfg.input_w;
    auto x = TensorT<T>::create({b, cfg.frame_channels, cfg.input_h, cfg.input_w});
    for (int64_t bi = 0; bi < b; ++bi) {
        const auto& ref = refs[static_cast<size_t>(bi)];
        const auto& frame = videos[static_cast<size_t>(ref.video)].frames[static_cast<size_t>(ref.center)];
        T* dst = x->data.data() + bi * hw;
        for (int64_t p = 0; p < hw; ++p) dst[p] = static_cast<T>(frame[static_cast<size_t>(p)]);
    }
    return x;
}

// --- Teacher targets ---

AnomalyMap TeacherScaling::apply(AnomalyMap map) const {
    const float range = hi - lo;
    if (range <= 0.0f) return map;
    for (auto& v : map.values) v = std::clamp((v - lo) / range, 0.0f, 1.0f);
    return map;
}

TeacherScaling compute_teacher_scaling(const Teacher& teacher, const std::vector<LoadedVideo>& videos) {
    TeacherScaling scaling;
    bool first = true;
    for (const auto& video : videos) {
        for (size_t f = 0; f < video.frames.size(); ++f) {
            const auto out = teacher.full_map(video.id, static_cast<int>(f));
            for (float v : out.full_map.values) {
                if (first) {
                    scaling.lo = scaling.hi = v;
                    first = false;
                } else {
                    scaling.lo = std::min(scaling.lo, v);
                    scaling.hi = std::max(scaling.hi, v);
                }
            }
        }
    }
    return scaling;
}

template <class T>
MapSetT<T> teacher_targets(const Teacher& teacher, const TeacherScaling& scaling,
                           const std::vector<LoadedVideo>& videos,
                           const std::vector<SequenceRef>& refs,
                           const std::vector<std::pair<int, int>>& resolutions) {
    MapSetT<T> out;
    const int64_t b = static_cast<int64_t>(refs.size());
    for (auto [h, w] : resolutions) out.maps.push_back(TensorT<T>::create({b, 1, h, w}));
    for (int64_t bi = 0; bi < b; ++bi) {
        const auto& ref = refs[static_cast<size_t>(bi)];
        auto full = scaling.apply(teacher.full_map(videos[static_cast<size_t>(ref.video)].id, ref.center).full_map);
        const auto pooled = downsample_map(full, resolutions);
        for (size_t k = 0; k < pooled.size(); ++k) {
            const int64_t per = pooled[k].h * pooled[k].w;
            T* dst = out.maps[k]->data.data() + bi * per;
            for (int64_t p = 0; p < per; ++p) dst[p] = static_cast<T>(pooled[k].values[static_cast<size_t>(p)]);
        }
    }
    return out;
}

// --- Training drivers ---

namespace {

template <class T>
void check_finite_loss(const TensorPtrT<T>& loss, Phase phase, int epoch, int batch) {
    if (!std::isfinite(static_cast<double>(loss->data[0])))
        throw NumericsError(std::string("training aborted: non-finite loss in phase ") +
                            (phase == Phase::pretrain ? "pretrain" : "distill") + " at epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batch));
}

std::vector<std::vector<SequenceRef>> shuffled_batches(const std::vector<SequenceRef>& refs,
                                                       int batch_size, uint64_t seed) {
    std::vector<SequenceRef> shuffled = refs;
    Rng rng(seed);
    for (size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[static_cast<size_t>(rng.below(i))]);
    std::vector<std::vector<SequenceRef>> batches;
    for (size_t start = 0; start < shuffled.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(shuffled.size(), start + static_cast<size_t>(batch_size));
        batches.emplace_back(shuffled.begin() + static_cast<long>(start),
                             shuffled.begin() + static_cast<long>(end));
    }
    return batches;
}

}  // namespace

template <class T>
std::vector<LossRow> pretrain_ae(StudentModelT<T>& model, DecoderT<T>& decoder,
                                 const std::vector<LoadedVideo>& train_videos, const TrainConfig& cfg) {
    cfg.validate(0);
    if (train_videos.empty()) throw std::invalid_argument("pretrain_ae: dataset is empty");
    const auto refs = valid_sequences(train_videos, model.cfg.input_frames, cfg.temporal_stride);
    if (refs.empty())
        throw std::invalid_argument("pretrain_ae: no valid sequences (clips shorter than the temporal context)");

    auto enc_store = model.encoder_store();
    auto dec_store = decoder.store();
    std::vector<TensorPtrT<T>> params = enc_store.tensors();
    for (auto& t : dec_store.tensors()) params.push_back(t);

    AdamStateT<T> opt;
    opt.lr = T(cfg.lr);
    opt.weight_decay = T(cfg.weight_decay);
    opt.init(params);

    std::vector<LossRow> rows;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = shuffled_batches(refs, cfg.batch_size,
                                              derive_seed(cfg.seed, "pretrain/epoch" + std::to_string(epoch)));
        for (size_t b = 0; b < batches.size(); ++b) {
            auto x = assemble_batch<T>(train_videos, batches[b], model.cfg, cfg.temporal_stride, false);
            auto target = center_frames<T>(train_videos, batches[b], model.cfg);
            TapeT<T> tape;
            TensorPtrT<T> loss;
            {
                typename TapeT<T>::Scope scope(tape);
                auto latent = model.encode(x, true);
                auto recon = decoder.forward(latent, true);
                loss = loss_ae<T>(recon, target);
            }
            check_finite_loss(loss, Phase::pretrain, epoch, static_cast<int>(b));
            zero_grads(params);
            tape.backward(loss);
            adam_step(params, opt);
            LossRow row;
            row.phase = Phase::pretrain;
            row.epoch = epoch;
            row.batch = static_cast<int>(b);
            row.l_ae = static_cast<double>(loss->data[0]);
            rows.push_back(row);
        }
    }
    return rows;
}

template <class T>
std::vector<LossRow> distill_train(StudentModelT<T>& model,
                                   const std::vector<LoadedVideo>& train_videos,
                                   const std::vector<const Teacher*>& teachers, const TrainConfig& cfg) {
    cfg.validate(teachers.size());
    if (train_videos.empty()) throw std::invalid_argument("distill_train: dataset is empty");
    if (teachers.empty()) throw std::invalid_argument("distill_train: at least one teacher required");

    // Teacher compatibility before any training: maps must cover the head
    // resolutions at full frame size.
    for (size_t ti = 0; ti < teachers.size(); ++ti) {
        const auto probe = teachers[ti]->full_map(train_videos[0].id, 0);
        if (probe.full_map.h != train_videos[0].height || probe.full_map.w != train_videos[0].width)
            throw std::invalid_argument("distill_train: teacher " + std::to_string(ti) + " emits " +
                                        std::to_string(probe.full_map.h) + "x" + std::to_string(probe.full_map.w) +
                                        " maps for " + std::to_string(train_videos[0].height) + "x" +
                                        std::to_string(train_videos[0].width) + " frames");
        for (auto [h, w] : model.cfg.head_resolutions)
            if (h > probe.full_map.h || w > probe.full_map.w)
                throw std::invalid_argument("distill_train: head resolution " + std::to_string(h) + "x" +
                                            std::to_string(w) + " exceeds teacher map resolution");
    }

    const auto refs = valid_sequences(train_videos, model.cfg.input_frames, cfg.temporal_stride);
    if (refs.empty()) throw std::invalid_argument("distill_train: no valid sequences");

    std::vector<TeacherScaling> scalings;
    for (const auto* t : teachers) scalings.push_back(compute_teacher_scaling(*t, train_videos));

    // Distillation targets are frozen; precompute them per sequence.
    std::vector<std::vector<std::vector<AnomalyMap>>> cache(teachers.size());
    for (size_t ti = 0; ti < teachers.size(); ++ti) {
        cache[ti].resize(refs.size());
        for (size_t ri = 0; ri < refs.size(); ++ri) {
            auto full = scalings[ti].apply(
                teachers[ti]->full_map(train_videos[static_cast<size_t>(refs[ri].video)].id, refs[ri].center).full_map);
            cache[ti][ri] = downsample_map(full, model.cfg.head_resolutions);
        }
    }
    // Map a SequenceRef back to its cache slot after shuffling; refs are
    // generated sorted by (video, center).
    auto slot_of = [&](const SequenceRef& ref) -> size_t {
        size_t lo = 0, hi = refs.size();
        while (lo < hi) {
            const size_t mid = (lo + hi) / 2;
            if (refs[mid].video < ref.video || (refs[mid].video == ref.video && refs[mid].center < ref.center))
                lo = mid + 1;
            else
                hi = mid;
        }
        return lo;
    };

    auto batch_targets = [&](size_t ti, const std::vector<SequenceRef>& batch) {
        MapSetT<T> out;
        const int64_t b = static_cast<int64_t>(batch.size());
        for (auto [h, w] : model.cfg.head_resolutions) out.maps.push_back(TensorT<T>::create({b, 1, h, w}));
        for (int64_t bi = 0; bi < b; ++bi) {
            const auto& pooled = cache[ti][slot_of(batch[static_cast<size_t>(bi)])];
            for (size_t k = 0; k < pooled.size(); ++k) {
                const int64_t per = pooled[k].h * pooled[k].w;
                T* dst = out.maps[k]->data.data() + bi * per;
                for (int64_t p = 0; p < per; ++p)
                    dst[p] = static_cast<T>(pooled[k].values[static_cast<size_t>(p)]);
            }
        }
        return out;
    };

    auto student_store = model.full_store();
    auto student_params = student_store.tensors();
    AdamStateT<T> student_opt;
    student_opt.lr = T(cfg.lr);
    student_opt.weight_decay = T(cfg.weight_decay);
    student_opt.init(student_params);

    const bool adversarial = cfg.adversarial_active(teachers.size());
    std::vector<DiscriminatorT<T>> discriminators;
    std::vector<std::vector<TensorPtrT<T>>> d_params;
    std::vector<AdamStateT<T>> d_opts;
    if (adversarial) {
        for (size_t ti = 0; ti < teachers.size(); ++ti) {
            discriminators.push_back(build_discriminator<T>(model.cfg.head_resolutions,
                                                            derive_seed(cfg.seed, "disc" + std::to_string(ti))));
            d_params.push_back(discriminators.back().store("d" + std::to_string(ti)).tensors());
            d_opts.emplace_back();
            d_opts.back().lr = T(cfg.lr);
            d_opts.back().weight_decay = T(cfg.weight_decay);
            d_opts.back().init(d_params.back());
        }
    }

    std::vector<LossRow> rows;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = shuffled_batches(refs, cfg.batch_size,
                                              derive_seed(cfg.seed, "distill/epoch" + std::to_string(epoch)));
        for (size_t b = 0; b < batches.size(); ++b) {
            auto x = assemble_batch<T>(train_videos, batches[b], model.cfg, cfg.temporal_stride, false);
            std::vector<MapSetT<T>> targets;
            for (size_t ti = 0; ti < teachers.size(); ++ti) targets.push_back(batch_targets(ti, batches[b]));

            // One student forward serves the discriminator steps (detached)
            // and the student step (live graph).
            TapeT<T> student_tape;
            MapSetT<T> student_maps;
            {
                typename TapeT<T>::Scope scope(student_tape);
                student_maps = model.forward(x, true);
            }

            LossRow row;
            row.phase = Phase::distill;
            row.epoch = epoch;
            row.batch = static_cast<int>(b);
            row.d_losses.assign(teachers.size(), 0.0);

            if (adversarial) {
                for (int dstep = 0; dstep < cfg.d_steps_per_s_step; ++dstep) {
                    for (size_t ti = 0; ti < teachers.size(); ++ti) {
                        TapeT<T> d_tape;
                        TensorPtrT<T> d_loss;
                        {
                            typename TapeT<T>::Scope scope(d_tape);
                            d_loss = loss_akd_single<T>(discriminators[ti], targets[ti], student_maps,
                                                        AkdSide::discriminator, cfg.gan_form);
                        }
                        check_finite_loss(d_loss, Phase::distill, epoch, static_cast<int>(b));
                        zero_grads(d_params[ti]);
                        d_tape.backward(d_loss);
                        adam_step(d_params[ti], d_opts[ti]);
                        row.d_losses[ti] = static_cast<double>(d_loss->data[0]);
                    }
                }
            }

            TensorPtrT<T> kd, akd, total;
            {
                typename TapeT<T>::Scope scope(student_tape);
                kd = cfg.use_kd ? loss_kd_total<T>(targets, student_maps, cfg.lambdas)
                                : TensorT<T>::scalar(T(0));
                akd = adversarial ? loss_akd_total<T>(discriminators, targets, student_maps,
                                                      AkdSide::generator, cfg.gan_form)
                                  : TensorT<T>::scalar(T(0));
                total = loss_total<T>(kd, akd, T(cfg.alpha));
            }
            check_finite_loss(total, Phase::distill, epoch, static_cast<int>(b));
            zero_grads(student_params);
            if (adversarial)
                for (auto& dp : d_params) zero_grads(dp);
            student_tape.backward(total);
            adam_step(student_params, student_opt);

            row.l_kd = static_cast<double>(kd->data[0]);
            row.l_akd = static_cast<double>(akd->data[0]);
            row.l_total = static_cast<double>(total->data[0]);
            rows.push_back(row);
        }
    }
    return rows;
}

void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows, size_t n_teachers) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("loss csv: cannot open " + path + " for writing");
    out << "phase,epoch,batch,l_ae,l_kd,l_akd,l_total";
    for (size_t i = 1; i <= n_teachers; ++i) out << ",d" << i << "_loss";
    out << "\n";
    for (const auto& row : rows) {
        out << (row.phase == Phase::pretrain ? "pretrain" : "distill") << "," << row.epoch << "," << row.batch
            << ",";
        if (row.phase == Phase::pretrain) {
            out << format_double(row.l_ae) << ",,,";
            for (size_t i = 0; i < n_teachers; ++i) out << ",";
        } else {
            out << "," << format_double(row.l_kd) << "," << format_double(row.l_akd) << ","
                << format_double(row.l_total);
            for (size_t i = 0; i < n_teachers; ++i)
                out << "," << (i < row.d_losses.size() ? format_double(row.d_losses[i]) : "");
        }
        out << "\n";
    }
}

#define VADKD_INSTANTIATE_DISTILL(T)                                                                   \
    template struct DiscriminatorT<T>;                                                                 \
    template DiscriminatorT<T> build_discriminator<T>(const std::vector<std::pair<int, int>>&,         \
                                                      uint64_t);                                       \
    template TensorPtrT<T> loss_kd_single<T>(const MapSetT<T>&, const MapSetT<T>&);                    \
    template TensorPtrT<T> loss_kd_total<T>(const std::vector<MapSetT<T>>&, const MapSetT<T>&,         \
                                            const std::vector<double>&);                               \
    template TensorPtrT<T> loss_akd_single<T>(const DiscriminatorT<T>&, const MapSetT<T>&,             \
                                              const MapSetT<T>&, AkdSide, GanForm);                    \
    template TensorPtrT<T> loss_akd_total<T>(const std::vector<DiscriminatorT<T>>&,                    \
                                             const std::vector<MapSetT<T>>&, const MapSetT<T>&,        \
                                             AkdSide, GanForm);                                        \
    template TensorPtrT<T> assemble_batch<T>(const std::vector<LoadedVideo>&,                          \
                                             const std::vector<SequenceRef>&, const ModelConfig&, int, \
                                             bool);                                                    \
    template TensorPtrT<T> center_frames<T>(const std::vector<LoadedVideo>&,                           \
                                            const std::vector<SequenceRef>&, const ModelConfig&);      \
    template MapSetT<T> teacher_targets<T>(const Teacher&, const TeacherScaling&,                      \
                                           const std::vector<LoadedVideo>&,                            \
                                           const std::vector<SequenceRef>&,                            \
                                           const std::vector<std::pair<int, int>>&);                   \
    template std::vector<LossRow> pretrain_ae<T>(StudentModelT<T>&, DecoderT<T>&,                      \
                                                 const std::vector<LoadedVideo>&, const TrainConfig&); \
    template std::vector<LossRow> distill_train<T>(StudentModelT<T>&, const std::vector<LoadedVideo>&, \
                                                   const std::vector<const Teacher*>&,                 \
                                                   const TrainConfig&);

VADKD_INSTANTIATE_DISTILL(float)
VADKD_INSTANTIATE_DISTILL(double)

#undef VADKD_INSTANTIATE_DISTILL

}  // namespace vadkd
