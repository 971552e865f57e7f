#include "vadkd/metrics.hpp"

#include <charconv>
#include <fstream>
#include <numeric>

namespace vadkd {

RocResult roc_auc(const ScoreSeries& series) {
    const size_t n = series.scores.size();
    if (series.labels.size() != n)
        throw std::invalid_argument("roc_auc: " + std::to_string(n) + " scores vs " +
                                    std::to_string(series.labels.size()) + " labels");
    RocResult result;
    for (int l : series.labels) {
        if (l != 0 && l != 1) throw std::invalid_argument("roc_auc: labels must be binary");
        (l == 1 ? result.positives : result.negatives) += 1;
    }
    if (result.positives == 0 || result.negatives == 0)
        throw AucUndefinedError("roc_auc: AUC undefined for single-class input (video " + series.video_id +
                                ", positives=" + std::to_string(result.positives) + ")");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return series.scores[a] < series.scores[b]; });

    // Average ranks over tie groups, then the Mann-Whitney U statistic.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && series.scores[order[j + 1]] == series.scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (size_t t = i; t <= j; ++t)
            if (series.labels[order[t]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double p = static_cast<double>(result.positives);
    const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
    result.auc = u / (p * static_cast<double>(result.negatives));
    return result;
}

RocResult micro_auc(const std::vector<ScoreSeries>& all_series) {
    ScoreSeries merged;
    merged.video_id = "<micro>";
    for (const auto& s : all_series) {
        merged.scores.insert(merged.scores.end(), s.scores.begin(), s.scores.end());
        merged.labels.insert(merged.labels.end(), s.labels.begin(), s.labels.end());
    }
    return roc_auc(merged);
}

MacroResult macro_auc(const std::vector<ScoreSeries>& all_series) {
    MacroResult result;
    double total = 0.0;
    for (const auto& s : all_series) {
        bool has_pos = false, has_neg = false;
        for (int l : s.labels) (l == 1 ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg) {
            result.excluded.push_back(s.video_id);
            continue;
        }
        total += roc_auc(s).auc;
        result.videos_used += 1;
    }
    if (result.videos_used == 0)
        throw AucUndefinedError("macro_auc: no video has both classes");
    result.auc = total / static_cast<double>(result.videos_used);
    return result;
}

double frame_score(const std::vector<AnomalyMap>& maps) {
    if (maps.empty()) throw std::invalid_argument("frame_score: empty map set");
    double acc = 0.0;
    for (const auto& m : maps) acc += static_cast<double>(m.max_value());
    return acc / static_cast<double>(maps.size());
}

std::vector<int> load_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("labels: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<int> labels;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        labels.push_back(std::stoi(line.substr(comma + 1)));
    }
    return labels;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_eval_report(const std::string& path, const std::vector<ScoreSeries>& all_series) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("report: cannot open " + path + " for writing");
    out << "video_id,auc,frames,positives\n";
    for (const auto& s : all_series) {
        int64_t pos = 0;
        for (int l : s.labels) pos += l;
        const bool single_class = pos == 0 || pos == static_cast<int64_t>(s.labels.size());
        out << s.video_id << ",";
        if (!single_class) out << format_double(roc_auc(s).auc);
        out << "," << s.labels.size() << "," << pos << "\n";
    }
    out << "micro," << format_double(micro_auc(all_series).auc) << "\n";
    out << "macro," << format_double(macro_auc(all_series).auc) << "\n";
}

void write_score_csv(const std::string& path, const std::vector<ScoreSeries>& all_series) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("scores: cannot open " + path + " for writing");
    out << "video_id,frame,score,label\n";
    for (const auto& s : all_series)
        for (size_t f = 0; f < s.scores.size(); ++f)
            out << s.video_id << "," << f << "," << format_double(s.scores[f]) << "," << s.labels[f] << "\n";
}

}  // namespace vadkd
