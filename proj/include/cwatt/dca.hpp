// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include "cwatt/attack_common.hpp"

namespace cwatt {

struct DcaConfig {
    double t_attack = 0.1;
    double eps_d = 8.0;  // total L-infinity budget on the 0-255 scale
    int max_iters = 10;  // M_D; each step moves by exactly eps_d / max_iters
    RemoveCriterion criterion = RemoveCriterion::Combined;
    int decode_k_max = 32;
    double decode_conf = 0.3;
};

/// Sum over the set of the cross-entropy between the softmax of the score
/// vector at each pixel and the category label. Throws std::invalid_argument
/// on an empty set.
double category_loss(const Tensor& heatmap, const std::vector<Cell>& cells, int category);
double category_loss(const DetectorModel& model, const Tensor& image,
                     const std::vector<Cell>& cells, int category);

/**
 * @brief L-infinity-normalized ascent direction of category_loss.
 *
 * Returns a unit-max-norm image-shaped gradient. When the raw gradient's
 * max-norm falls below 1e-12 a zero tensor is returned and *near_zero (if
 * given) is set; callers skip the contribution.
 */
Tensor category_gradient(const DetectorModel& model, const Tensor& image,
                         const std::vector<Cell>& cells, int category,
                         bool* near_zero = nullptr);

/// Dense Category-wise Attack: PGD-style signed steps of the summed
/// per-category normalized gradients, budget eps_d split over max_iters.
AttackReport dca_attack(const DetectorModel& model, const Tensor& image,
                        const DcaConfig& config, AttackTrace* trace = nullptr);

} // namespace cwatt
