// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <memory>
#include <vector>

#include "cwatt/tensor.hpp"

namespace cwatt {

/// Heatmap + size map produced by one forward pass. The heatmap is
/// (H/stride) x (W/stride) x categories with logistic scores in [0, 1];
/// the size map has 2 channels (box width, height in heatmap cells).
struct DetectorOutput {
    Tensor heatmap;
    Tensor sizemap;
    int stride = 1;
};

/// Axis-aligned box in image pixels.
struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double area() const { return (x2 - x1) * (y2 - y1); }
};

double iou(const Box& a, const Box& b);

struct Detection {
    Box box;
    int category = 0;
    double confidence = 0.0;
    int row = 0, col = 0; // heatmap cell of the peak
};

struct GroundTruthBox {
    int category = 0;
    Box box;
};

/// Opaque per-forward activation record, reused across several backprops
/// at the same input.
struct ModelTrace {
    DetectorOutput output;
    virtual ~ModelTrace() = default;
};

/**
 * @brief Differentiable anchor-free keypoint detector interface.
 *
 * A model maps an image (H x W x C, values on the 0-255 scale, H and W
 * multiples of stride()) to a per-category heatmap plus a size map, and can
 * backpropagate any scalar function of the heatmap to the input pixels.
 * Instances are immutable after construction/training and safe to share
 * read-only across threads.
 */
class DetectorModel {
public:
    virtual ~DetectorModel() = default;

    virtual int stride() const = 0;
    virtual int categories() const = 0;
    virtual int image_channels() const = 0;

    virtual DetectorOutput forward(const Tensor& image) const = 0;

    /// Forward pass that keeps the activations needed for backprop.
    virtual std::unique_ptr<ModelTrace> forward_trace(const Tensor& image) const = 0;

    /// Gradient of sum(d_heatmap .* heatmap) with respect to the input image.
    virtual Tensor input_gradient(const ModelTrace& trace, const Tensor& d_heatmap) const = 0;
};

/// Scalar loss defined on a heatmap, with its analytic heatmap gradient.
class HeatmapLoss {
public:
    virtual ~HeatmapLoss() = default;
    virtual double value(const Tensor& heatmap) const = 0;
    virtual Tensor gradient(const Tensor& heatmap) const = 0;
};

/// Weighted sum of individual heatmap cells: sum_i coeff_i * heatmap(row_i, col_i, ch_i).
class CellSumLoss : public HeatmapLoss {
public:
    struct Term {
        int row, col, channel;
        double coeff;
    };

    CellSumLoss() = default;
    explicit CellSumLoss(std::vector<Term> terms) : terms_(std::move(terms)) {}

    void add(int row, int col, int channel, double coeff = 1.0) {
        terms_.push_back({row, col, channel, coeff});
    }

    double value(const Tensor& heatmap) const override;
    Tensor gradient(const Tensor& heatmap) const override;

private:
    std::vector<Term> terms_;
};

/// Exact input-pixel gradient of `loss` evaluated on the model's heatmap.
/// Throws std::runtime_error when the loss value is not finite.
Tensor score_gradient(const DetectorModel& model, const Tensor& image, const HeatmapLoss& loss);

/**
 * @brief CenterNet-style peak decoding.
 *
 * A detection is a heatmap cell that is a 3x3 local maximum (ties resolved
 * toward the lowest row-major index) with score >= conf_threshold. Boxes are
 * centered at cell * stride with width/height read from the size map and
 * scaled by stride, then clipped to the image bounds. At most k_max
 * detections are returned, highest confidence first.
 */
std::vector<Detection> decode_detections(const DetectorOutput& output,
                                         int image_height, int image_width,
                                         int k_max = 32, double conf_threshold = 0.3);

} // namespace cwatt
