// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/attack_common.hpp"

#include <algorithm>
#include <cmath>

namespace cwatt {

PixelBounds eps_box(const Tensor& clean, double eps_fraction) {
    return abs_box(clean, eps_fraction * 255.0);
}

PixelBounds abs_box(const Tensor& clean, double eps) {
    PixelBounds b;
    b.lo = Tensor::zeros_like(clean);
    b.hi = Tensor::zeros_like(clean);
    for (size_t i = 0; i < clean.size(); ++i) {
        b.lo[i] = std::max(0.0, clean[i] - eps);
        b.hi[i] = std::min(255.0, clean[i] + eps);
    }
    return b;
}

Tensor clip_to_bounds(const Tensor& x, const PixelBounds& bounds) {
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i], bounds.lo[i], bounds.hi[i]);
    return out;
}

Tensor quantize_to_grid(const Tensor& x, const PixelBounds& bounds) {
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i) {
        double qlo = std::ceil(bounds.lo[i]);
        double qhi = std::floor(bounds.hi[i]);
        if (qlo <= qhi)
            out[i] = std::clamp(std::nearbyint(out[i]), qlo, qhi);
        else
            out[i] = std::clamp(out[i], bounds.lo[i], bounds.hi[i]);
    }
    return out;
}

std::vector<Cell> remove_pixels(const Tensor& heat_before, const Tensor& heat_after,
                                const std::vector<Cell>& cells, int category,
                                double t_attack, RemoveCriterion criterion) {
    std::vector<Cell> kept;
    kept.reserve(cells.size());
    for (const Cell& p : cells) {
        bool argmax_same = cell_argmax(heat_after, p.row, p.col) ==
                           cell_argmax(heat_before, p.row, p.col);
        bool above = heat_after.at(p.row, p.col, category) > t_attack;
        bool keep = false;
        switch (criterion) {
            case RemoveCriterion::Argmax: keep = argmax_same; break;
            case RemoveCriterion::Threshold: keep = above; break;
            case RemoveCriterion::Combined: keep = argmax_same && above; break;
        }
        if (keep) kept.push_back(p);
    }
    return kept;
}

std::vector<Cell> remove_pixels(const DetectorModel& model,
                                const Tensor& x_before, const Tensor& x_after,
                                const std::vector<Cell>& cells, int category,
                                double t_attack, RemoveCriterion criterion) {
    Tensor heat_before = model.forward(x_before).heatmap;
    Tensor heat_after = model.forward(x_after).heatmap;
    return remove_pixels(heat_before, heat_after, cells, category, t_attack, criterion);
}

} // namespace cwatt
