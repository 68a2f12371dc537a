#include "dovf/fusion.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "dovf/errors.hpp"

namespace dovf {

ScoreMatrix fuse(const std::vector<WeightedScores>& inputs) {
    if (inputs.empty()) throw ArgumentError("fusion needs at least one score matrix");
    const auto& first = *inputs.front().scores;
    bool any_positive = false;
    for (const auto& in : inputs) {
        if (!(in.weight >= 0)) throw ArgumentError("fusion weights must be non-negative");
        any_positive = any_positive || in.weight > 0;
        if (in.scores->class_count() != first.class_count()) {
            throw IntegrityError("fusion inputs have " + std::to_string(in.scores->class_count()) + " and " +
                                 std::to_string(first.class_count()) + " classes");
        }
        if (in.scores->video_ids != first.video_ids) throw IntegrityError("fusion inputs list different videos or orders");
    }
    if (!any_positive) throw ArgumentError("fusion weights are all zero");

    ScoreMatrix out;
    out.video_ids = first.video_ids;
    out.columns = first.columns;
    out.scores = Matrix::Zero(first.scores.rows(), first.scores.cols());
    for (const auto& in : inputs) out.scores += in.weight * in.scores->scores;
    return out;
}

ScoreMatrix normalize_rows_minmax(const ScoreMatrix& scores) {
    ScoreMatrix out = scores;
    for (Eigen::Index i = 0; i < out.scores.rows(); ++i) {
        const double lo = out.scores.row(i).minCoeff();
        const double hi = out.scores.row(i).maxCoeff();
        if (hi > lo) {
            out.scores.row(i) = (out.scores.row(i).array() - lo) / (hi - lo);
        } else {
            out.scores.row(i).setZero();
        }
    }
    return out;
}

ScoreMatrix align_external(const ScoreMatrix& scores, const Manifest& manifest, const std::string& split) {
    if (scores.class_count() != manifest.class_count()) {
        throw IntegrityError("external scores have " + std::to_string(scores.class_count()) + " classes, manifest has " +
                             std::to_string(manifest.class_count()));
    }
    std::vector<Eigen::Index> col_order(manifest.class_count());
    std::iota(col_order.begin(), col_order.end(), Eigen::Index{0});
    bool named = !scores.columns.empty();
    for (const auto& c : scores.columns) {
        named = named && std::find(manifest.classes.begin(), manifest.classes.end(), c) != manifest.classes.end();
    }
    if (named) {
        for (std::size_t c = 0; c < manifest.class_count(); ++c) {
            const auto it = std::find(scores.columns.begin(), scores.columns.end(), manifest.classes[c]);
            col_order[c] = it - scores.columns.begin();
        }
    }

    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t i = 0; i < scores.video_ids.size(); ++i) row_of.emplace(scores.video_ids[i], static_cast<Eigen::Index>(i));
    const auto wanted = manifest.test_videos(split);
    std::string missing;
    for (const auto& v : wanted) {
        if (!row_of.count(v)) missing += (missing.empty() ? "" : ", ") + v;
    }
    if (!missing.empty()) throw IntegrityError("external scores are missing test videos: " + missing);

    ScoreMatrix out;
    out.video_ids = wanted;
    out.columns = manifest.classes;
    out.scores.resize(static_cast<Eigen::Index>(wanted.size()), static_cast<Eigen::Index>(manifest.class_count()));
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        const auto src = row_of.at(wanted[i]);
        for (std::size_t c = 0; c < manifest.class_count(); ++c) {
            out.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = scores.scores(src, col_order[c]);
        }
    }
    return out;
}

std::size_t argmax_row(const ScoreMatrix& scores, std::size_t row) {
    const auto r = static_cast<Eigen::Index>(row);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.scores.cols(); ++c) {
        if (scores.scores(r, c) > scores.scores(r, best)) best = c;
    }
    return static_cast<std::size_t>(best);
}

double accuracy(const ScoreMatrix& scores, const Manifest& manifest, const std::string& split) {
    const auto wanted = manifest.test_videos(split);
    if (wanted.empty()) throw IntegrityError("split '" + split + "' has no test videos");
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < scores.video_ids.size(); ++i) row_of.emplace(scores.video_ids[i], i);
    std::size_t correct = 0;
    std::string missing;
    for (const auto& v : wanted) {
        const auto it = row_of.find(v);
        if (it == row_of.end()) {
            missing += (missing.empty() ? "" : ", ") + v;
            continue;
        }
        if (argmax_row(scores, it->second) == manifest.label_of(v)) ++correct;
    }
    if (!missing.empty()) throw IntegrityError("scores do not cover test videos: " + missing);
    return static_cast<double>(correct) / static_cast<double>(wanted.size());
}

double mean_over_splits(const std::vector<double>& accuracies) {
    if (accuracies.empty()) throw ArgumentError("no split accuracies to average");
    return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
}

}  // namespace dovf
