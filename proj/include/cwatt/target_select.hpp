// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <map>
#include <vector>

#include "cwatt/detector.hpp"

namespace cwatt {

/// One heatmap coordinate.
struct Cell {
    int row = 0, col = 0;
    bool operator==(const Cell& o) const { return row == o.row && col == o.col; }
    bool operator<(const Cell& o) const { return row != o.row ? row < o.row : col < o.col; }
};

/**
 * @brief Category-wise target pixel sets.
 *
 * A heatmap cell belongs to the set of its argmax category (ties toward the
 * lowest category index) when that category's raw logistic score strictly
 * exceeds the attack threshold. Cells are unique within a set; categories
 * without qualifying cells are absent from the map.
 */
struct TargetPixelSet {
    double threshold_used = 0.0;
    std::map<int, std::vector<Cell>> sets;

    bool empty() const {
        for (const auto& [cat, cells] : sets)
            if (!cells.empty()) return false;
        return true;
    }
    size_t total_pixels() const {
        size_t n = 0;
        for (const auto& [cat, cells] : sets) n += cells.size();
        return n;
    }
};

/// Builds the target sets from a heatmap; 0 < t_attack < 1.
TargetPixelSet select_targets(const Tensor& heatmap, double t_attack);

/// Sum over the set of the softmax (over the n-vector of heatmap scores at
/// each cell) component of `category`. Throws std::invalid_argument on an
/// empty set.
double category_score(const DetectorModel& model, const Tensor& image,
                      const std::vector<Cell>& cells, int category);

/// Same, evaluated on an already-computed heatmap.
double category_score(const Tensor& heatmap, const std::vector<Cell>& cells, int category);

/// Softmax of the score vector at one heatmap cell.
std::vector<double> cell_softmax(const Tensor& heatmap, int row, int col);

/// Argmax category of the score vector at one cell, ties toward the lowest index.
int cell_argmax(const Tensor& heatmap, int row, int col);

} // namespace cwatt
