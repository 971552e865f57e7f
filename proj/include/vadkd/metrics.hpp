#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "vadkd/student.hpp"
#include "vadkd/teachers.hpp"

namespace vadkd {

struct ScoreSeries {
    std::string video_id;
    std::vector<double> scores;
    std::vector<int> labels;
};

struct RocResult {
    double auc = 0.0;
    int64_t positives = 0;
    int64_t negatives = 0;
};

// Single-class inputs have no defined AUC.
class AucUndefinedError : public std::runtime_error {
public:
    explicit AucUndefinedError(const std::string& what) : std::runtime_error(what) {}
};

// Frame-level AUC as the Mann-Whitney rank statistic: tied score pairs
// receive half credit via average ranks.
RocResult roc_auc(const ScoreSeries& series);

// All frames concatenated into a single series, then one AUC.
RocResult micro_auc(const std::vector<ScoreSeries>& all_series);

struct MacroResult {
    double auc = 0.0;
    int64_t videos_used = 0;
    std::vector<std::string> excluded;  // single-class videos, reported not averaged
};

MacroResult macro_auc(const std::vector<ScoreSeries>& all_series);

// Frame-level score: mean over heads of each map's maximum.
double frame_score(const std::vector<AnomalyMap>& maps);

// Batched variant over a student output; element i scores sample i.
template <class T>
std::vector<double> frame_scores(const MapSetT<T>& maps) {
    if (maps.maps.empty()) throw std::invalid_argument("frame_scores: empty map set");
    const int64_t n = maps.maps[0]->dim(0);
    std::vector<double> scores(static_cast<size_t>(n), 0.0);
    for (const auto& map : maps.maps) {
        const int64_t per = map->numel() / n;
        for (int64_t i = 0; i < n; ++i) {
            T best = map->data[static_cast<size_t>(i * per)];
            for (int64_t j = 1; j < per; ++j)
                best = std::max(best, map->data[static_cast<size_t>(i * per + j)]);
            scores[static_cast<size_t>(i)] += static_cast<double>(best);
        }
    }
    for (auto& s : scores) s /= static_cast<double>(maps.maps.size());
    return scores;
}

// Per-video labels CSV: header "frame_index,label".
std::vector<int> load_labels_csv(const std::string& path);

// Evaluation report CSV: one "video_id,auc,frames,positives" row per video
// (auc empty for excluded single-class videos), then "micro,<v>" and
// "macro,<v>" summary lines.
void write_eval_report(const std::string& path, const std::vector<ScoreSeries>& all_series);

// Plot-ready per-frame scores: "video_id,frame,score,label".
void write_score_csv(const std::string& path, const std::vector<ScoreSeries>& all_series);

std::string format_double(double v);

}  // namespace vadkd
