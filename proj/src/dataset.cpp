// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cwatt/imageio.hpp"
#include "cwatt/rng.hpp"

namespace cwatt {

namespace fs = std::filesystem;
using nlohmann::json;

const char* category_name(int category) {
    switch (category) {
        case 0: return "circle";
        case 1: return "square";
        case 2: return "triangle";
        case 3: return "cross";
        default: throw std::invalid_argument("category_name: unknown category");
    }
}

bool shape_contains(const SceneObject& obj, double x, double y) {
    // Rotate into the shape frame.
    double dx = x - obj.cx, dy = y - obj.cy;
    double c = std::cos(-obj.rotation), s = std::sin(-obj.rotation);
    double u = c * dx - s * dy;
    double v = s * dx + c * dy;
    double r = obj.radius;
    switch (obj.category) {
        case 0: // circle
            return u * u + v * v <= r * r;
        case 1: { // square with half-side 0.82 r
            double hs = 0.85 * r;
            return std::fabs(u) <= hs && std::fabs(v) <= hs;
        }
        case 2: { // equilateral triangle, circumradius r, apex up
            // Vertices at angle 90, 210, 330 degrees in the shape frame.
            double x0 = 0, y0 = -r;
            double x1 = -0.8660254037844386 * r, y1 = 0.5 * r;
            double x2 = 0.8660254037844386 * r, y2 = 0.5 * r;
            auto side = [&](double ax, double ay, double bx, double by) {
                return (bx - ax) * (v - ay) - (by - ay) * (u - ax);
            };
            double d0 = side(x0, y0, x1, y1);
            double d1 = side(x1, y1, x2, y2);
            double d2 = side(x2, y2, x0, y0);
            bool has_neg = (d0 < 0) || (d1 < 0) || (d2 < 0);
            bool has_pos = (d0 > 0) || (d1 > 0) || (d2 > 0);
            return !(has_neg && has_pos);
        }
        case 3: { // cross: two centered bars
            double arm = 0.36 * r;
            return (std::fabs(u) <= r && std::fabs(v) <= arm) ||
                   (std::fabs(v) <= r && std::fabs(u) <= arm);
        }
        default:
            return false;
    }
}

namespace {

// 4x4 supersampled coverage of one pixel.
double pixel_coverage(const SceneObject& obj, int px, int py) {
    int hits = 0;
    for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx)
            if (shape_contains(obj, px + (sx + 0.5) / 4.0, py + (sy + 0.5) / 4.0)) ++hits;
    return hits / 16.0;
}

void textured_background(Tensor& img, Rng& rng) {
    double base[3], amp[3], fx[3], fy[3], phase[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(60.0, 130.0);
        amp[c] = rng.uniform(8.0, 24.0);
        fx[c] = rng.uniform(0.5, 2.5) / kSceneSize;
        fy[c] = rng.uniform(0.5, 2.5) / kSceneSize;
        phase[c] = rng.uniform(0.0, 6.283185307179586);
    }
    double noise_amp = rng.uniform(2.0, 6.0);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = base[c] +
                           amp[c] * std::sin(6.283185307179586 * (fx[c] * x + fy[c] * y) + phase[c]) +
                           noise_amp * (rng.uniform() - 0.5) * 2.0;
                img.at(y, x, c) = v;
            }
        }
    }
}

// Vivid random color, independent of the category: shape geometry is the
// only class cue, as with real-world objects.
void object_color(Rng& rng, double out[3]) {
    double h = rng.uniform(0.0, 6.0);
    double s = rng.uniform(0.65, 1.0);
    double v = rng.uniform(0.75, 1.0) * 255.0;
    double c = v * s;
    double x = c * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
    double m = v - c;
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
    }
    out[0] = r + m;
    out[1] = g + m;
    out[2] = b + m;
}

} // namespace

SyntheticScene render_scene(uint64_t seed) {
    Rng rng(seed);
    SyntheticScene scene;
    scene.seed = seed;
    scene.image = Tensor(kSceneSize, kSceneSize, 3);
    textured_background(scene.image, rng);

    int target_count = rng.uniform_int(1, 4);
    constexpr double kMinCenterDist = 26.0;
    for (int i = 0; i < target_count; ++i) {
        SceneObject obj;
        bool placed = false;
        for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
            obj.category = rng.uniform_int(0, kNumCategories - 1);
            obj.radius = rng.uniform(8.0, 14.0);
            double margin = obj.radius + 3.0;
            obj.cx = rng.uniform(margin, kSceneSize - margin);
            obj.cy = rng.uniform(margin, kSceneSize - margin);
            switch (obj.category) {
                case 0: obj.rotation = 0.0; break;
                case 1: // near-axis-aligned: a 45-degree square reads as a circle at this scale
                    obj.rotation = rng.uniform(-0.26, 0.26);
                    break;
                default: obj.rotation = rng.uniform(0.0, 6.283185307179586); break;
            }
            placed = true;
            for (const SceneObject& other : scene.objects) {
                double dx = other.cx - obj.cx, dy = other.cy - obj.cy;
                if (dx * dx + dy * dy < kMinCenterDist * kMinCenterDist) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) continue;
        object_color(rng, obj.color);

        // Composite with supersampled coverage and track the drawn mask.
        int lo_x = kSceneSize, lo_y = kSceneSize, hi_x = -1, hi_y = -1;
        int span = static_cast<int>(std::ceil(obj.radius)) + 2;
        int y0 = std::max(0, static_cast<int>(obj.cy) - span);
        int y1 = std::min(kSceneSize - 1, static_cast<int>(obj.cy) + span);
        int x0 = std::max(0, static_cast<int>(obj.cx) - span);
        int x1 = std::min(kSceneSize - 1, static_cast<int>(obj.cx) + span);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double alpha = pixel_coverage(obj, x, y);
                if (alpha <= 0.0) continue;
                for (int c = 0; c < 3; ++c)
                    scene.image.at(y, x, c) =
                        (1.0 - alpha) * scene.image.at(y, x, c) + alpha * obj.color[c];
                if (alpha > 0.5) {
                    lo_x = std::min(lo_x, x);
                    hi_x = std::max(hi_x, x);
                    lo_y = std::min(lo_y, y);
                    hi_y = std::max(hi_y, y);
                }
            }
        }
        if (hi_x < lo_x) continue; // nothing drawn above the mask threshold
        obj.box = Box{static_cast<double>(lo_x), static_cast<double>(lo_y),
                      static_cast<double>(hi_x + 1), static_cast<double>(hi_y + 1)};
        scene.objects.push_back(obj);
    }

    // Snap to the 8-bit grid so the PNG on disk equals the in-memory image.
    for (size_t i = 0; i < scene.image.size(); ++i) {
        double v = std::nearbyint(scene.image[i]);
        scene.image[i] = std::clamp(v, 0.0, 255.0);
    }
    return scene;
}

void generate_dataset(const std::string& dir, int count, uint64_t seed) {
    if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
    fs::create_directories(dir);
    Rng base(seed);
    for (int i = 0; i < count; ++i) {
        SyntheticScene scene = render_scene(base.fork(static_cast<uint64_t>(i)).next_u64());
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d", i);

        write_png((fs::path(dir) / (std::string(name) + ".png")).string(), tensor_to_u8(scene.image));

        json ann;
        ann["image"] = std::string(name) + ".png";
        ann["width"] = kSceneSize;
        ann["height"] = kSceneSize;
        ann["seed"] = scene.seed;
        ann["objects"] = json::array();
        for (const SceneObject& obj : scene.objects) {
            json o;
            o["category"] = obj.category;
            o["name"] = category_name(obj.category);
            o["box"] = {obj.box.x1, obj.box.y1, obj.box.x2, obj.box.y2};
            ann["objects"].push_back(o);
        }
        std::ofstream os((fs::path(dir) / (std::string(name) + ".json")).string());
        if (!os) throw std::runtime_error("generate_dataset: cannot write annotation in " + dir);
        os << ann.dump(2) << "\n";
    }
}

std::vector<DatasetItem> load_dataset_index(const std::string& dir) {
    std::vector<DatasetItem> items;
    if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir);
    std::vector<fs::path> sidecars;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") sidecars.push_back(entry.path());
    std::sort(sidecars.begin(), sidecars.end());

    for (const fs::path& p : sidecars) {
        std::ifstream is(p);
        json ann = json::parse(is);
        DatasetItem item;
        item.name = p.stem().string();
        item.image_path = (p.parent_path() / ann.at("image").get<std::string>()).string();
        for (const auto& o : ann.at("objects")) {
            GroundTruthBox gt;
            gt.category = o.at("category").get<int>();
            auto b = o.at("box");
            gt.box = Box{b.at(0).get<double>(), b.at(1).get<double>(),
                         b.at(2).get<double>(), b.at(3).get<double>()};
            item.truths.push_back(gt);
        }
        items.push_back(std::move(item));
    }
    return items;
}

Tensor load_dataset_image(const DatasetItem& item) {
    return u8_to_tensor(read_png(item.image_path));
}

} // namespace cwatt
