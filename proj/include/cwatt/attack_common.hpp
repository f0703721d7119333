// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <map>
#include <vector>

#include "cwatt/detector.hpp"
#include "cwatt/target_select.hpp"

namespace cwatt {

/// Which pixels survive a RemovePixels pass.
enum class RemoveCriterion {
    Argmax,    // keep while the argmax category is unchanged between iterates
    Threshold, // keep while the category's score still exceeds t_attack
    Combined,  // keep only while both hold (default)
};

/// Per-pixel feasible interval for the working image.
struct PixelBounds {
    Tensor lo, hi;
};

/// [0,255] intersected with clean +/- eps_fraction*255 (elementwise).
PixelBounds eps_box(const Tensor& clean, double eps_fraction);

/// [0,255] intersected with clean +/- eps (absolute, 0-255 scale).
PixelBounds abs_box(const Tensor& clean, double eps);

Tensor clip_to_bounds(const Tensor& x, const PixelBounds& bounds);

/// Snap onto the 8-bit integer grid without leaving the bounds; persisted
/// images then reload bit-exactly from PNG. Falls back to real-valued
/// clamping only when the bounds contain no integer.
Tensor quantize_to_grid(const Tensor& x, const PixelBounds& bounds);

/**
 * @brief Drops attacked pixels from a target set by re-evaluating the model.
 *
 * Keeps p when (depending on the criterion) the argmax category at x_after
 * matches the one at x_before, and/or the category's score at x_after still
 * exceeds t_attack. The result is always a subset of `cells`.
 */
std::vector<Cell> remove_pixels(const DetectorModel& model,
                                const Tensor& x_before, const Tensor& x_after,
                                const std::vector<Cell>& cells, int category,
                                double t_attack, RemoveCriterion criterion);

/// Same test on precomputed heatmaps.
std::vector<Cell> remove_pixels(const Tensor& heat_before, const Tensor& heat_after,
                                const std::vector<Cell>& cells, int category,
                                double t_attack, RemoveCriterion criterion);

/// Result record of one attack run. The adversarial image is already
/// quantized to the 8-bit grid inside the attack's pixel bounds.
struct AttackReport {
    Tensor adversarial;
    bool success = false;
    int outer_iterations = 0;
    int inner_iterations = 0;
    int deepfool_iterations = 0;
    int surviving_pixels = 0;
    double linf = 0.0;
    double p_l2 = 0.0;
    double p_l0 = 0.0;
    double seconds = 0.0;
    int degenerate_boundaries = 0;
    int zero_gradient_events = 0;
    int stalled_iterations = 0;
    bool budget_ok = true; // in-loop invariant audit (box / step quantization)
    std::vector<Detection> detections;
};

/// Optional per-iteration instrumentation for tests and audits.
struct AttackTrace {
    std::vector<Tensor> iterates;
    std::vector<std::map<int, std::vector<Cell>>> sets_after;
    std::vector<Tensor> step_deltas;         // DCA: pre-clip step per outer iteration
    std::vector<double> attacked_scores;     // SCA: category_score of the attacked set
    std::vector<int> dense_changed;          // SCA: support of the dense step per inner iteration
    std::vector<int> sparse_changed;         // SCA: pixels touched by the linear solver
    std::vector<int> normal_support;         // SCA: nonzero coordinates of the plane normal
    std::vector<bool> crossed;               // SCA: solver crossing flag per inner iteration
    std::vector<double> crossing_margins;    // SCA: w^T(x' - x^B) when crossed
};

} // namespace cwatt
