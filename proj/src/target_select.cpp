// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/target_select.hpp"

#include <cmath>
#include <stdexcept>

namespace cwatt {

int cell_argmax(const Tensor& heatmap, int row, int col) {
    int best = 0;
    double best_score = heatmap.at(row, col, 0);
    for (int k = 1; k < heatmap.channels(); ++k) {
        double s = heatmap.at(row, col, k);
        if (s > best_score) {
            best_score = s;
            best = k;
        }
    }
    return best;
}

std::vector<double> cell_softmax(const Tensor& heatmap, int row, int col) {
    const int n = heatmap.channels();
    std::vector<double> out(n);
    double m = heatmap.at(row, col, 0);
    for (int k = 1; k < n; ++k) m = std::max(m, heatmap.at(row, col, k));
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        out[k] = std::exp(heatmap.at(row, col, k) - m);
        sum += out[k];
    }
    for (int k = 0; k < n; ++k) out[k] /= sum;
    return out;
}

TargetPixelSet select_targets(const Tensor& heatmap, double t_attack) {
    if (t_attack <= 0.0 || t_attack >= 1.0)
        throw std::invalid_argument("select_targets: t_attack must be in (0, 1)");
    TargetPixelSet result;
    result.threshold_used = t_attack;
    for (int r = 0; r < heatmap.height(); ++r) {
        for (int c = 0; c < heatmap.width(); ++c) {
            int k = cell_argmax(heatmap, r, c);
            if (heatmap.at(r, c, k) > t_attack)
                result.sets[k].push_back(Cell{r, c});
        }
    }
    return result;
}

double category_score(const Tensor& heatmap, const std::vector<Cell>& cells, int category) {
    if (cells.empty())
        throw std::invalid_argument("category_score: empty target set");
    double total = 0.0;
    for (const Cell& p : cells)
        total += cell_softmax(heatmap, p.row, p.col)[category];
    return total;
}

double category_score(const DetectorModel& model, const Tensor& image,
                      const std::vector<Cell>& cells, int category) {
    return category_score(model.forward(image).heatmap, cells, category);
}

} // namespace cwatt
