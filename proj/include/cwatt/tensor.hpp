// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cwatt {

/**
 * @brief Dense H x W x C array of doubles, row-major with interleaved channels.
 *
 * The single numeric container for images (values on the 0-255 scale),
 * heatmaps, size maps and gradients. Index layout: (y * width + x) * channels + c.
 */
class Tensor {
public:
    Tensor() = default;
    Tensor(int height, int width, int channels)
        : h_(height), w_(width), c_(channels),
          data_(static_cast<size_t>(height) * width * channels, 0.0) {
        if (height < 0 || width < 0 || channels < 0)
            throw std::invalid_argument("Tensor: negative dimension");
    }

    static Tensor zeros_like(const Tensor& other) {
        return Tensor(other.h_, other.w_, other.c_);
    }

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool same_shape(const Tensor& other) const {
        return h_ == other.h_ && w_ == other.w_ && c_ == other.c_;
    }

    double& at(int y, int x, int c) {
        return data_[(static_cast<size_t>(y) * w_ + x) * c_ + c];
    }
    double at(int y, int x, int c) const {
        return data_[(static_cast<size_t>(y) * w_ + x) * c_ + c];
    }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double v) { data_.assign(data_.size(), v); }

    /// Clamp every element into [lo, hi] in place.
    void clamp(double lo, double hi) {
        for (double& v : data_) v = v < lo ? lo : (v > hi ? hi : v);
    }

    /// this += scale * other (shapes must match).
    void add_scaled(const Tensor& other, double scale) {
        if (!same_shape(other)) throw std::invalid_argument("add_scaled: shape mismatch");
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) {
            double a = v < 0 ? -v : v;
            if (a > m) m = a;
        }
        return m;
    }

    bool operator==(const Tensor& other) const {
        return h_ == other.h_ && w_ == other.w_ && c_ == other.c_ && data_ == other.data_;
    }

private:
    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<double> data_;
};

/// max_i |a_i - b_i|; shapes must match.
double linf_distance(const Tensor& a, const Tensor& b);

/// true iff every element is finite.
bool all_finite(const Tensor& t);

} // namespace cwatt
