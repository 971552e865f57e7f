#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vadkd/optim.hpp"
#include "vadkd/student.hpp"
#include "vadkd/synthvid.hpp"
#include "vadkd/teachers.hpp"

namespace vadkd {

enum class GanForm { saturating, non_saturating };
enum class Phase { pretrain, distill };

struct TrainConfig {
    int epochs = 35;
    int batch_size = 64;
    double lr = 1e-4;
    double weight_decay = 1e-5;
    int temporal_stride = 3;  // t
    double alpha = 0.1;
    std::vector<double> lambdas = {1.0, 1.0};
    uint64_t seed = 7;
    Phase phase = Phase::distill;
    int d_steps_per_s_step = 1;
    GanForm gan_form = GanForm::non_saturating;
    bool use_kd = true;
    bool use_akd = true;

    // The adversarial machinery (discriminators included) only exists when
    // the term can contribute; an alpha=0 run is the standard-KD run.
    bool adversarial_active(size_t n_teachers) const {
        return use_akd && alpha != 0.0 && n_teachers > 0;
    }
    void validate(size_t n_teachers) const;
};

// Multi-resolution binary discriminator: a conv stem walks the largest map
// down, intermediate maps are resampled in at matching stages, the smallest
// joins after global pooling, and a pointwise fusion emits one logit.
template <class T>
struct DiscriminatorT {
    std::vector<std::pair<int, int>> resolutions;  // ascending area, as configured
    Conv2dT<T> conv0, conv1, conv2, fuse;

    TensorPtrT<T> forward(const MapSetT<T>& maps) const;  // -> N x 1 x 1 x 1 logits
    ParamStoreT<T> store(const std::string& prefix);
};

template <class T>
DiscriminatorT<T> build_discriminator(const std::vector<std::pair<int, int>>& head_resolutions,
                                      uint64_t seed);

// --- Losses ---

// Mean squared reconstruction error of the middle frame.
template <class T>
TensorPtrT<T> loss_ae(const TensorPtrT<T>& reconstruction, const TensorPtrT<T>& target) {
    return mse_loss<T>(reconstruction, target);
}

// Sum over resolutions of per-resolution mean squared error (a sum of means,
// not a global mean).
template <class T>
TensorPtrT<T> loss_kd_single(const MapSetT<T>& target, const MapSetT<T>& pred);

// Lambda-weighted sum of per-teacher distillation losses.
template <class T>
TensorPtrT<T> loss_kd_total(const std::vector<MapSetT<T>>& teacher_maps, const MapSetT<T>& pred,
                            const std::vector<double>& lambdas);

enum class AkdSide { discriminator, generator };

// Discriminator side: BCE pushing D(teacher)->1 and D(student)->0, with the
// student maps detached. Generator side: the saturating form descends the
// zero-sum objective directly (log(1 - sigma(D(student)))), the
// non-saturating default minimizes -log sigma(D(student)).
template <class T>
TensorPtrT<T> loss_akd_single(const DiscriminatorT<T>& d, const MapSetT<T>& teacher_maps,
                              const MapSetT<T>& student_maps, AkdSide side, GanForm form);

template <class T>
TensorPtrT<T> loss_akd_total(const std::vector<DiscriminatorT<T>>& ds,
                             const std::vector<MapSetT<T>>& teacher_map_sets,
                             const MapSetT<T>& student_maps, AkdSide side, GanForm form);

template <class T>
TensorPtrT<T> loss_total(const TensorPtrT<T>& kd, const TensorPtrT<T>& akd, T alpha) {
    return add<T>(kd, mul_scalar<T>(akd, alpha));
}

// --- Batch assembly ---

struct SequenceRef {
    int video = 0;
    int center = 0;
};

// Valid training centers: every frame whose full temporal context fits the
// clip (clip of 9 frames at t=3 yields centers {3,4,5}).
std::vector<SequenceRef> valid_sequences(const std::vector<LoadedVideo>& videos, int input_frames,
                                         int t);

// Frames at stride t channel-concatenated into one NCHW tensor. When `clamp`
// is set, out-of-range context indices are clamped to the clip bounds
// (evaluation mode, so every frame can be scored).
template <class T>
TensorPtrT<T> assemble_batch(const std::vector<LoadedVideo>& videos,
                             const std::vector<SequenceRef>& refs, const ModelConfig& cfg, int t,
                             bool clamp);

template <class T>
TensorPtrT<T> center_frames(const std::vector<LoadedVideo>& videos,
                            const std::vector<SequenceRef>& refs, const ModelConfig& cfg);

// --- Teacher target preparation ---

// Min-max normalization constants over every training-split frame's map.
struct TeacherScaling {
    float lo = 0.0f;
    float hi = 1.0f;
    AnomalyMap apply(AnomalyMap map) const;
};

TeacherScaling compute_teacher_scaling(const Teacher& teacher, const std::vector<LoadedVideo>& videos);

// Normalized, downsampled distillation targets for a batch, as constants.
template <class T>
MapSetT<T> teacher_targets(const Teacher& teacher, const TeacherScaling& scaling,
                           const std::vector<LoadedVideo>& videos,
                           const std::vector<SequenceRef>& refs,
                           const std::vector<std::pair<int, int>>& resolutions);

// --- Training loop ---

// One CSV row per mini-batch: phase,epoch,batch,l_ae,l_kd,l_akd,l_total,
// then one discriminator-loss column per teacher.
struct LossRow {
    Phase phase = Phase::pretrain;
    int epoch = 0;
    int batch = 0;
    double l_ae = 0.0, l_kd = 0.0, l_akd = 0.0, l_total = 0.0;
    std::vector<double> d_losses;
};

void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows, size_t n_teachers);

// Phase 1: minimize the reconstruction error of the middle frame over the
// normal-only training split. Trains encoder + decoder; heads stay untouched.
template <class T>
std::vector<LossRow> pretrain_ae(StudentModelT<T>& model, DecoderT<T>& decoder,
                                 const std::vector<LoadedVideo>& train_videos, const TrainConfig& cfg);

// Phase 2: joint standard + adversarial distillation. Per batch, one student
// forward feeds d_steps_per_s_step discriminator updates (student maps
// detached) and then one student update on the joint objective. Student and
// discriminators own separate Adam states with identical hyperparameters.
template <class T>
std::vector<LossRow> distill_train(StudentModelT<T>& model,
                                   const std::vector<LoadedVideo>& train_videos,
                                   const std::vector<const Teacher*>& teachers, const TrainConfig& cfg);

}  // namespace vadkd
