// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace cwatt {

namespace {

struct RankedPrediction {
    double confidence;
    int image;
    int index; // position within the image's prediction list
    const Detection* det;
};

// AP for one category over all images; n_gt > 0.
double average_precision(std::vector<RankedPrediction>& preds,
                         const std::vector<ImageEval>& evals,
                         int category, int n_gt, double iou_threshold) {
    std::stable_sort(preds.begin(), preds.end(), [](const RankedPrediction& a, const RankedPrediction& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.image != b.image) return a.image < b.image;
        return a.index < b.index;
    });

    // Greedy matching: each ground-truth box is consumed once.
    std::vector<std::vector<bool>> used(evals.size());
    for (size_t i = 0; i < evals.size(); ++i) used[i].assign(evals[i].truths.size(), false);

    std::vector<bool> is_tp(preds.size(), false);
    for (size_t p = 0; p < preds.size(); ++p) {
        const auto& truths = evals[preds[p].image].truths;
        double best_iou = 0.0;
        int best = -1;
        for (size_t g = 0; g < truths.size(); ++g) {
            if (truths[g].category != category || used[preds[p].image][g]) continue;
            double v = iou(preds[p].det->box, truths[g].box);
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0 && best_iou >= iou_threshold) {
            is_tp[p] = true;
            used[preds[p].image][best] = true;
        }
    }

    // All-points interpolation over the PR staircase.
    std::vector<double> precision(preds.size()), recall(preds.size());
    int tp = 0;
    for (size_t p = 0; p < preds.size(); ++p) {
        if (is_tp[p]) ++tp;
        precision[p] = static_cast<double>(tp) / static_cast<double>(p + 1);
        recall[p] = static_cast<double>(tp) / n_gt;
    }
    for (int p = static_cast<int>(preds.size()) - 2; p >= 0; --p)
        precision[p] = std::max(precision[p], precision[p + 1]);

    double ap = 0.0;
    double prev_recall = 0.0;
    for (size_t p = 0; p < preds.size(); ++p) {
        if (recall[p] > prev_recall) {
            ap += (recall[p] - prev_recall) * precision[p];
            prev_recall = recall[p];
        }
    }
    return ap;
}

} // namespace

MapResult mean_average_precision(const std::vector<ImageEval>& evals, double iou_threshold) {
    if (iou_threshold <= 0.0 || iou_threshold >= 1.0)
        throw std::invalid_argument("mean_average_precision: iou_threshold must be in (0, 1)");

    std::set<int> gt_categories, pred_categories;
    for (const ImageEval& ev : evals) {
        for (const GroundTruthBox& gt : ev.truths) gt_categories.insert(gt.category);
        for (const Detection& d : ev.predictions) pred_categories.insert(d.category);
    }

    MapResult result;
    if (gt_categories.empty()) {
        // Nothing to miss: perfect score unless spurious predictions exist.
        result.map = pred_categories.empty() ? 1.0 : 0.0;
        for (int c : pred_categories) result.per_category_ap[c] = 0.0;
        return result;
    }

    double sum = 0.0;
    for (int category : gt_categories) {
        int n_gt = 0;
        std::vector<RankedPrediction> preds;
        for (size_t i = 0; i < evals.size(); ++i) {
            for (const GroundTruthBox& gt : evals[i].truths)
                if (gt.category == category) ++n_gt;
            for (size_t j = 0; j < evals[i].predictions.size(); ++j) {
                const Detection& d = evals[i].predictions[j];
                if (d.category == category)
                    preds.push_back({d.confidence, static_cast<int>(i), static_cast<int>(j), &d});
            }
        }
        double ap = average_precision(preds, evals, category, n_gt, iou_threshold);
        result.per_category_ap[category] = ap;
        sum += ap;
    }
    // Spurious categories with no ground truth anywhere score zero but do not
    // enter the mean over ground-truth categories.
    for (int c : pred_categories)
        if (!gt_categories.count(c)) result.per_category_ap[c] = 0.0;

    result.map = sum / static_cast<double>(gt_categories.size());
    return result;
}

double attack_success_rate(double map_clean, double map_attack) {
    if (map_clean <= 0.0)
        throw std::domain_error("attack_success_rate: undefined for map_clean <= 0");
    return 1.0 - map_attack / map_clean;
}

double attack_transfer_ratio(double asr_target, double asr_origin) {
    if (asr_origin <= 0.0)
        throw std::domain_error("attack_transfer_ratio: undefined for asr_origin <= 0");
    return asr_target / asr_origin;
}

Perceptibility perceptibility(const Tensor& clean, const Tensor& adversarial) {
    if (!clean.same_shape(adversarial))
        throw std::invalid_argument("perceptibility: shape mismatch");

    Perceptibility p;
    double sq = 0.0;
    for (size_t i = 0; i < clean.size(); ++i) {
        double d = (adversarial[i] - clean[i]) / 255.0;
        sq += d * d;
    }
    p.p_l2 = std::sqrt(sq / static_cast<double>(clean.size()));

    size_t changed = 0;
    const size_t locations = static_cast<size_t>(clean.height()) * clean.width();
    for (int y = 0; y < clean.height(); ++y) {
        for (int x = 0; x < clean.width(); ++x) {
            for (int c = 0; c < clean.channels(); ++c) {
                if (std::fabs(adversarial.at(y, x, c) - clean.at(y, x, c)) > 0.5) {
                    ++changed;
                    break;
                }
            }
        }
    }
    p.p_l0 = locations > 0 ? static_cast<double>(changed) / static_cast<double>(locations) : 0.0;
    return p;
}

} // namespace cwatt
