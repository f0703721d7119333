// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cwatt {

double iou(const Box& a, const Box& b) {
    double ix1 = std::max(a.x1, b.x1);
    double iy1 = std::max(a.y1, b.y1);
    double ix2 = std::min(a.x2, b.x2);
    double iy2 = std::min(a.y2, b.y2);
    double iw = ix2 - ix1;
    double ih = iy2 - iy1;
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    double inter = iw * ih;
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double linf_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("linf_distance: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = std::fabs(a[i] - b[i]);
        if (d > m) m = d;
    }
    return m;
}

bool all_finite(const Tensor& t) {
    for (size_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

double CellSumLoss::value(const Tensor& heatmap) const {
    double s = 0.0;
    for (const Term& t : terms_) s += t.coeff * heatmap.at(t.row, t.col, t.channel);
    return s;
}

Tensor CellSumLoss::gradient(const Tensor& heatmap) const {
    Tensor g = Tensor::zeros_like(heatmap);
    for (const Term& t : terms_) g.at(t.row, t.col, t.channel) += t.coeff;
    return g;
}

Tensor score_gradient(const DetectorModel& model, const Tensor& image, const HeatmapLoss& loss) {
    auto trace = model.forward_trace(image);
    double v = loss.value(trace->output.heatmap);
    if (!std::isfinite(v))
        throw std::runtime_error("score_gradient: loss value is not finite");
    Tensor d_heat = loss.gradient(trace->output.heatmap);
    return model.input_gradient(*trace, d_heat);
}

namespace {

bool is_peak(const Tensor& heat, int row, int col, int ch) {
    const int hh = heat.height(), hw = heat.width();
    double s = heat.at(row, col, ch);
    int self = row * hw + col;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            int ny = row + dy, nx = col + dx;
            if (ny < 0 || ny >= hh || nx < 0 || nx >= hw) continue;
            double ns = heat.at(ny, nx, ch);
            if (ns > s) return false;
            if (ns == s && ny * hw + nx < self) return false;
        }
    }
    return true;
}

} // namespace

std::vector<Detection> decode_detections(const DetectorOutput& output,
                                         int image_height, int image_width,
                                         int k_max, double conf_threshold) {
    const Tensor& heat = output.heatmap;
    const Tensor& size = output.sizemap;
    const int stride = output.stride;
    constexpr double kMinSide = 1e-3; // heatmap cells; keeps clipped boxes non-degenerate

    std::vector<Detection> peaks;
    for (int r = 0; r < heat.height(); ++r) {
        for (int c = 0; c < heat.width(); ++c) {
            for (int k = 0; k < heat.channels(); ++k) {
                double s = heat.at(r, c, k);
                if (s < conf_threshold) continue;
                if (!is_peak(heat, r, c, k)) continue;
                double w = std::max(size.at(r, c, 0), kMinSide) * stride;
                double h = std::max(size.at(r, c, 1), kMinSide) * stride;
                double cx = static_cast<double>(c) * stride;
                double cy = static_cast<double>(r) * stride;
                Detection det;
                det.box.x1 = std::max(0.0, cx - w / 2.0);
                det.box.y1 = std::max(0.0, cy - h / 2.0);
                det.box.x2 = std::min(static_cast<double>(image_width), cx + w / 2.0);
                det.box.y2 = std::min(static_cast<double>(image_height), cy + h / 2.0);
                det.category = k;
                det.confidence = s;
                det.row = r;
                det.col = c;
                if (det.box.x2 <= det.box.x1 || det.box.y2 <= det.box.y1) continue;
                peaks.push_back(det);
            }
        }
    }

    std::sort(peaks.begin(), peaks.end(), [&](const Detection& a, const Detection& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        int ia = a.row * heat.width() + a.col;
        int ib = b.row * heat.width() + b.col;
        if (ia != ib) return ia < ib;
        return a.category < b.category;
    });
    if (static_cast<int>(peaks.size()) > k_max) peaks.resize(k_max);
    return peaks;
}

} // namespace cwatt
