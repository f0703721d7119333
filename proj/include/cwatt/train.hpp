// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cwatt/detector.hpp"
#include "cwatt/toy_net.hpp"

namespace cwatt {

struct TrainExample {
    Tensor image;
    std::vector<GroundTruthBox> truths;
};

struct TrainConfig {
    int categories = 4;
    int epochs = 40;
    int batch_size = 16;
    double learning_rate = 3e-3;
    int lr_drop_epoch = 32;      // learning rate is multiplied by lr_drop after this many epochs
    double lr_drop = 0.1;
    double focal_alpha = 2.0;    // exponent on the prediction
    double focal_beta = 4.0;     // exponent on the soft negative weight
    double size_loss_weight = 0.1;
    double noise_sigma = 0.0;    // additive pixel noise augmentation (0-255 scale)
    uint64_t seed = 7;
    int threads = 1;
    bool verbose = false;
};

/// Gaussian-splatted heatmap, size targets and center mask for one example.
struct TrainTargets {
    Tensor heatmap;   // (H/R) x (W/R) x n
    Tensor size;      // (H/R) x (W/R) x 2, box w/h in cells at center cells
    Tensor mask;      // (H/R) x (W/R) x 1, 1 at object centers
    int num_centers = 0;
};

TrainTargets build_targets(const std::vector<GroundTruthBox>& truths,
                           int image_height, int image_width, int stride, int categories);

/// Penalty-reduced focal loss + weighted L1 size loss. Returns the scalar
/// loss and writes the heatmap/sizemap gradients.
double detection_loss(const DetectorOutput& output, const TrainTargets& targets,
                      const TrainConfig& config, Tensor& d_heatmap, Tensor& d_sizemap);

/// Trains the miniature detector. Deterministic given config.seed for any
/// thread count. Throws std::runtime_error if the loss turns non-finite.
std::unique_ptr<ToyDetector> train_toy_detector(const std::vector<TrainExample>& dataset,
                                                const TrainConfig& config);

} // namespace cwatt
