// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwatt/detector.hpp"
#include "cwatt/tensor.hpp"

namespace cwatt {

inline constexpr int kSceneSize = 96;
inline constexpr int kNumCategories = 4;

/// Category indices are fixed: 0 circle, 1 square, 2 triangle, 3 cross.
const char* category_name(int category);

struct SceneObject {
    int category = 0;
    double cx = 0, cy = 0;      // center in image pixels
    double radius = 0;          // characteristic half-extent in pixels
    double rotation = 0;        // radians
    double color[3] = {0, 0, 0};
    Box box;                    // tight box of the drawn mask
};

/// One synthetic 96x96x3 scene: 1-4 anti-aliased shapes on a textured
/// background, pixel values quantized to the 8-bit grid.
struct SyntheticScene {
    Tensor image;
    std::vector<SceneObject> objects;
    uint64_t seed = 0;
};

SyntheticScene render_scene(uint64_t seed);

/// Analytic point-in-shape test at image coordinates (x, y); the oracle
/// used for mask-based box checks.
bool shape_contains(const SceneObject& obj, double x, double y);

/// Writes `count` scenes (PNG + JSON annotation sidecar per image) under
/// `dir`, deterministically derived from `seed`.
void generate_dataset(const std::string& dir, int count, uint64_t seed);

struct DatasetItem {
    std::string name;        // basename without extension
    std::string image_path;
    std::vector<GroundTruthBox> truths;
};

/// Lists the annotation sidecars under `dir` in name order.
std::vector<DatasetItem> load_dataset_index(const std::string& dir);

/// Loads the image of one dataset item as a 0-255 tensor.
Tensor load_dataset_image(const DatasetItem& item);

} // namespace cwatt
