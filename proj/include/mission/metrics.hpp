#pragma once

// Binary classification metrics: confusion counts, accuracy / precision /
// recall / F1, rank-statistic ROC-AUC and seeded k-fold splitting.
// Layout follows [[TN, FP], [FN, TP]]: rows are the actual class, columns
// the predicted class.

#include "mission/error.hpp"
#include "mission/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace mission::metrics {

struct ConfusionMatrix {
    std::uint64_t tn = 0, fp = 0, fn = 0, tp = 0;

    std::uint64_t total() const noexcept { return tn + fp + fn + tp; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Precision, recall and F1 are empty when their denominator is zero.
struct MetricsReport {
    double accuracy = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> roc_auc;
};

inline ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions) {
    MISSION_REQUIRE(labels.size() == predictions.size(), ErrorCode::LengthMismatch,
                    std::to_string(labels.size()) + " labels vs " + std::to_string(predictions.size()) +
                        " predictions");
    MISSION_REQUIRE(!labels.empty(), ErrorCode::EmptyInput, "no labels");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i], p = predictions[i];
        MISSION_REQUIRE((y == 0 || y == 1) && (p == 0 || p == 1), ErrorCode::InvalidArgument,
                        "labels and predictions must be 0 or 1 (row " + std::to_string(i) + ")");
        if (y == 1) (p == 1 ? cm.tp : cm.fn)++;
        else (p == 1 ? cm.fp : cm.tn)++;
    }
    return cm;
}

inline MetricsReport metrics(const ConfusionMatrix& cm) {
    MISSION_REQUIRE(cm.total() > 0, ErrorCode::EmptyMatrix, "confusion matrix has no counts");
    auto d = [](std::uint64_t v) { return static_cast<double>(v); };
    MetricsReport r;
    r.accuracy = d(cm.tp + cm.tn) / d(cm.total());
    if (cm.tp + cm.fp > 0) r.precision = d(cm.tp) / d(cm.tp + cm.fp);
    if (cm.tp + cm.fn > 0) r.recall = d(cm.tp) / d(cm.tp + cm.fn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0) {
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    }
    return r;
}

/// Mann-Whitney U in half-units: `twice_u` counts each (positive, negative)
/// pair as 2 when the positive scores higher and 1 on a tie.
struct RankStatistic {
    std::uint64_t twice_u = 0;
    std::uint64_t positives = 0;
    std::uint64_t negatives = 0;

    double auc() const noexcept {
        return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
    }
};

inline RankStatistic rank_statistic(std::span<const int> labels, std::span<const double> scores) {
    MISSION_REQUIRE(labels.size() == scores.size(), ErrorCode::LengthMismatch,
                    std::to_string(labels.size()) + " labels vs " + std::to_string(scores.size()) + " scores");
    RankStatistic st;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        MISSION_REQUIRE(labels[i] == 0 || labels[i] == 1, ErrorCode::InvalidArgument, "labels must be 0 or 1");
        MISSION_REQUIRE(!std::isnan(scores[i]), ErrorCode::InvalidArgument, "score is NaN");
        (labels[i] == 1 ? st.positives : st.negatives)++;
    }
    MISSION_REQUIRE(st.positives > 0 && st.negatives > 0, ErrorCode::SingleClass,
                    "both classes are needed for ROC-AUC");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Doubled 1-based ranks: a tie group spanning ranks [lo, hi] gets lo+hi each.
    std::uint64_t twice_rank_sum = 0;
    for (std::size_t lo = 0; lo < order.size();) {
        std::size_t hi = lo;
        while (hi + 1 < order.size() && scores[order[hi + 1]] == scores[order[lo]]) ++hi;
        std::uint64_t pos_in_group = 0;
        for (std::size_t i = lo; i <= hi; ++i) pos_in_group += static_cast<std::uint64_t>(labels[order[i]]);
        twice_rank_sum += pos_in_group * static_cast<std::uint64_t>(lo + 1 + hi + 1);
        lo = hi + 1;
    }
    st.twice_u = twice_rank_sum - st.positives * (st.positives + 1);
    return st;
}

inline double roc_auc(std::span<const int> labels, std::span<const double> scores) {
    return rank_statistic(labels, scores).auc();
}

/// Round half away from zero for non-negative values, to `digits` places.
/// A small epsilon absorbs representation error such as 0.885 -> 0.88499..
inline double round_half_up(double x, int digits = 2) {
    const double scale = std::pow(10.0, digits);
    return std::floor(x * scale + 0.5 + 1e-9) / scale;
}

/// Partition 0..n-1 into k folds after a seeded shuffle. The first n % k
/// folds hold one extra index; each fold is returned sorted.
inline std::vector<std::vector<std::size_t>> kfold_splits(std::size_t n, std::size_t k, std::uint64_t seed) {
    MISSION_REQUIRE(k >= 2, ErrorCode::BadFoldCount, "k must be >= 2");
    MISSION_REQUIRE(n >= k, ErrorCode::BadFoldCount,
                    "n = " + std::to_string(n) + " is smaller than k = " + std::to_string(k));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);

    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t at = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(at),
                        idx.begin() + static_cast<std::ptrdiff_t>(at + size));
        std::sort(folds[f].begin(), folds[f].end());
        at += size;
    }
    return folds;
}

/// label,prediction[,score] rows. The score column is all-or-nothing.
struct PredictionSet {
    std::vector<int> labels;
    std::vector<int> predictions;
    std::vector<double> scores;

    bool has_scores() const noexcept { return !scores.empty(); }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::optional<int> parse_bit(const std::string& s) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    return std::nullopt;
}

}  // namespace detail

/// A first row whose label cell is not 0/1 is taken as a header.
inline PredictionSet parse_predictions(std::istream& in) {
    PredictionSet p;
    std::size_t line_no = 0;
    std::optional<std::size_t> width;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        auto bad = [&](const std::string& why) {
            throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": " + why);
        };
        if (!width && !cells.empty() && !detail::parse_bit(cells[0])) {
            width = cells.size();
            continue;  // header
        }
        if (cells.size() != 2 && cells.size() != 3) bad("expected label,prediction[,score]");
        if (width && *width != cells.size()) bad("column count changes");
        width = cells.size();
        const auto y = detail::parse_bit(cells[0]);
        const auto yhat = detail::parse_bit(cells[1]);
        if (!y || !yhat) bad("label and prediction must be 0 or 1");
        p.labels.push_back(*y);
        p.predictions.push_back(*yhat);
        if (cells.size() == 3) {
            std::size_t used = 0;
            double s = 0.0;
            try {
                s = std::stod(cells[2], &used);
            } catch (const std::exception&) {
                bad("score is not a number");
            }
            if (used != cells[2].size() || std::isnan(s)) bad("score is not a number");
            p.scores.push_back(s);
        }
    }
    MISSION_REQUIRE(!p.labels.empty(), ErrorCode::EmptyInput, "prediction file has no rows");
    return p;
}

inline PredictionSet load_predictions(const std::string& path) {
    std::ifstream in(path);
    MISSION_REQUIRE(in.good(), ErrorCode::IoError, "cannot open " + path);
    return parse_predictions(in);
}

/// Confusion-based metrics, plus ROC-AUC when scores are present.
inline MetricsReport evaluate_predictions(const PredictionSet& p, ConfusionMatrix* cm_out = nullptr) {
    const ConfusionMatrix cm = confusion(p.labels, p.predictions);
    MetricsReport r = metrics(cm);
    if (p.has_scores()) r.roc_auc = roc_auc(p.labels, p.scores);
    if (cm_out) *cm_out = cm;
    return r;
}

}  // namespace mission::metrics
