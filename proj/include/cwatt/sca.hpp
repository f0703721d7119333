// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <stdexcept>

#include "cwatt/attack_common.hpp"

namespace cwatt {

/// Scoring of DeepFool candidate categories.
enum class DeepFoolScoreMode {
    Paper,      // score_k = sum of the candidate category's scores over the set
    Difference, // score_k = candidate sum minus target sum (classic DeepFool)
};

struct ScaConfig {
    double t_attack = 0.1;
    double eps_s = 0.1;      // per-pixel clip radius as a fraction of 255
    int max_inner_iters = 20;   // M_S
    double overshoot = 0.02;
    int df_max_iters = 50;
    int outer_guard = 200;
    // Trust region for one DeepFool step (0-255 scale). Saturated logistic
    // scores make the raw linearized step overshoot by ~1/sigmoid'; the cap
    // keeps the boundary anchor local so the sparse solver stays sparse.
    double df_step_cap = 10.0;
    RemoveCriterion criterion = RemoveCriterion::Combined;
    DeepFoolScoreMode score_mode = DeepFoolScoreMode::Difference;
    int decode_k_max = 32;
    double decode_conf = 0.3;
};

/// Local linearization of the decision boundary: the plane
/// { x : normal^T (x - anchor) = 0 } with a unit-L2 normal.
struct Hyperplane {
    Tensor normal;
    Tensor anchor;
};

/// Raised when the boundary normal vanishes (adversarial and clean labels
/// coincide on every target pixel).
struct DegenerateBoundary : std::runtime_error {
    DegenerateBoundary() : std::runtime_error("approx_boundary: degenerate (zero) normal") {}
};

struct DeepFoolResult {
    Tensor point;       // dense adversarial example x^B
    int iterations = 0;
    bool completed = false; // target set emptied before the iteration guard
};

/**
 * @brief Category-wise DeepFool: accumulates minimal-L2 linearized steps
 * until every pixel of the target set is attacked or the guard is hit.
 *
 * Each step picks the non-target category l minimizing |score_l| / ||w_l||_2
 * with w_l the gradient of the set-sum score difference, then moves by
 * (|score_l| / ||w_l||_2^2) w_l, clipping into [0, 255]. Internal pruning of
 * the working set is argmax-based regardless of config.criterion: the
 * returned point must cross label boundaries for the boundary normal at it
 * to be nonzero.
 */
DeepFoolResult cw_deepfool(const DetectorModel& model, const Tensor& image,
                           const std::vector<Cell>& targets, int target_category,
                           const ScaConfig& config);

/**
 * @brief Boundary normal at the dense adversarial point.
 *
 * w' is the input gradient of the set-sum of adversarial-label scores minus
 * the set-sum of clean-label scores, both evaluated at x_boundary; labels
 * come from the argmax at x_boundary and at image respectively. Throws
 * DegenerateBoundary when ||w'|| vanishes.
 */
Hyperplane approx_boundary(const DetectorModel& model, const Tensor& x_boundary,
                           const Tensor& image, const std::vector<Cell>& targets);

struct LinearSolverResult {
    Tensor point;
    bool crossed = false;
    int changed_coords = 0;
    double margin = 0.0; // normal^T (point - anchor) before overshoot
};

/**
 * @brief Greedy box-constrained projection onto (or past) the hyperplane.
 *
 * Coordinates are taken in decreasing |normal| order; each moves just far
 * enough to zero the residual, clipped into its bounds; saturated
 * coordinates are dropped and the walk continues. On crossing, the full
 * step is scaled by (1 + overshoot) and re-clipped. If every usable
 * coordinate saturates first, the saturated point is returned with
 * crossed = false.
 */
LinearSolverResult linear_solver(const Tensor& x, const Hyperplane& plane,
                                 const PixelBounds& bounds, double overshoot);

/// Sparse Category-wise Attack over all target sets of the image.
AttackReport sca_attack(const DetectorModel& model, const Tensor& image,
                        const ScaConfig& config, AttackTrace* trace = nullptr);

} // namespace cwatt
