// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cwatt/detector.hpp"

namespace cwatt {

/// One convolution layer: weights are (kernel*kernel*in_ch) x out_ch,
/// row-major, patch columns ordered (ky, kx, cin).
struct ConvLayer {
    int in_ch = 0, out_ch = 0;
    int kernel = 3, stride = 1, pad = 1, dilation = 1;
    std::vector<double> weights;
    std::vector<double> bias;

    int out_dim(int in_dim) const {
        return (in_dim + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
    }
    size_t weight_count() const {
        return static_cast<size_t>(kernel) * kernel * in_ch * out_ch;
    }
};

/// Parameter-shaped gradient accumulator for one ToyDetector.
struct NetGradients {
    std::vector<std::vector<double>> weights; // one entry per layer (trunk..., heat, size)
    std::vector<std::vector<double>> biases;

    void zero();
    void add(const NetGradients& other, double scale = 1.0);
};

/**
 * @brief Miniature trainable keypoint detector with output stride 4.
 *
 * Trunk: four 3x3 convolutions (two strided, the last one dilated) with
 * softplus activations; heads: 1x1 logistic heatmap over n categories and a
 * 1x1 linear size map (box width/height in heatmap cells). Input pixels are
 * on the 0-255 scale and normalized internally. All math is double
 * precision; smooth activations keep analytic input gradients within
 * finite-difference tolerance everywhere.
 */
class ToyDetector : public DetectorModel {
public:
    ToyDetector(int categories, uint64_t init_seed);

    int stride() const override { return 4; }
    int categories() const override { return categories_; }
    int image_channels() const override { return 3; }
    uint64_t init_seed() const { return init_seed_; }

    DetectorOutput forward(const Tensor& image) const override;
    std::unique_ptr<ModelTrace> forward_trace(const Tensor& image) const override;
    Tensor input_gradient(const ModelTrace& trace, const Tensor& d_heatmap) const override;

    /// Parameter gradients for d_heatmap/d_sizemap upstream gradients.
    /// Accumulates into `out` (which must have matching layout; see make_gradients).
    void backward_params(const ModelTrace& trace, const Tensor& d_heatmap,
                         const Tensor& d_sizemap, NetGradients& out) const;

    NetGradients make_gradients() const;

    /// All layers in order: trunk layers, then heat head, then size head.
    std::vector<ConvLayer>& layers() { return layers_; }
    const std::vector<ConvLayer>& layers() const { return layers_; }
    int trunk_layer_count() const { return trunk_count_; }

    size_t parameter_count() const;

private:
    struct Trace;

    int categories_;
    uint64_t init_seed_;
    int trunk_count_ = 0;
    std::vector<ConvLayer> layers_; // trunk..., heat head, size head
};

/// Serialize/deserialize a trained model to a single self-describing
/// binary archive (version, architecture, seed, shapes, weights).
void save_model(const ToyDetector& model, const std::string& path);
std::unique_ptr<ToyDetector> load_model(const std::string& path);

} // namespace cwatt
