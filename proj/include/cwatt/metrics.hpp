// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <map>
#include <optional>
#include <vector>

#include "cwatt/detector.hpp"
#include "cwatt/tensor.hpp"

namespace cwatt {

/// Predictions and ground truth for one image.
struct ImageEval {
    std::vector<Detection> predictions;
    std::vector<GroundTruthBox> truths;
};

struct MapResult {
    double map = 0.0;
    std::map<int, double> per_category_ap;
};

/**
 * @brief PascalVOC-style mean average precision.
 *
 * Per category: predictions across all images are ranked by descending
 * confidence and matched greedily to at most one unmatched ground-truth box
 * (IoU >= iou_threshold) in their image; AP is the area under the
 * all-points-interpolated precision-recall curve. mAP averages the
 * categories present in the ground truth. A category with predictions but
 * no ground truth anywhere scores 0. With no ground truth and no
 * predictions at all, mAP is 1.
 */
MapResult mean_average_precision(const std::vector<ImageEval>& evals, double iou_threshold = 0.5);

/// ASR = 1 - map_attack / map_clean. Throws std::domain_error when
/// map_clean is zero (undefined). Not clamped; a helpful attack is negative.
double attack_success_rate(double map_clean, double map_attack);

/// ATR = asr_target / asr_origin. Throws std::domain_error when
/// asr_origin <= 0.
double attack_transfer_ratio(double asr_target, double asr_origin);

struct Perceptibility {
    double p_l2 = 0.0; // RMS of the perturbation on the 0-1 scale
    double p_l0 = 0.0; // fraction of pixel locations with any channel changed by > 0.5/255-scale
};

Perceptibility perceptibility(const Tensor& clean, const Tensor& adversarial);

/// Aggregated campaign-level evaluation record.
struct EvalResult {
    double map_clean = 0.0;
    double map_attack = 0.0;
    double asr = 0.0;
    std::optional<double> atr;
    double p_l2 = 0.0;
    double p_l0 = 0.0;
    std::map<int, double> per_category_ap;
};

} // namespace cwatt
