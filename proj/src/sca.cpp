// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/sca.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace cwatt {

namespace {

double l2_norm(const Tensor& t) {
    double s = 0.0;
    for (size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
    return std::sqrt(s);
}

// Gradient of the set-sum of one category's heatmap scores.
Tensor set_sum_gradient(const DetectorModel& model, const ModelTrace& trace,
                        const std::vector<Cell>& cells, int category) {
    Tensor d_heat = Tensor::zeros_like(trace.output.heatmap);
    for (const Cell& p : cells) d_heat.at(p.row, p.col, category) += 1.0;
    return model.input_gradient(trace, d_heat);
}

double set_sum(const Tensor& heatmap, const std::vector<Cell>& cells, int category) {
    double s = 0.0;
    for (const Cell& p : cells) s += heatmap.at(p.row, p.col, category);
    return s;
}

} // namespace

DeepFoolResult cw_deepfool(const DetectorModel& model, const Tensor& image,
                           const std::vector<Cell>& targets, int target_category,
                           const ScaConfig& config) {
    DeepFoolResult result;
    result.point = image;
    if (targets.empty()) {
        result.completed = true;
        return result;
    }

    std::vector<Cell> alive = targets;
    auto trace = model.forward_trace(result.point);
    const int n = model.categories();

    while (!alive.empty() && result.iterations < config.df_max_iters) {
        const Tensor& heat = trace->output.heatmap;
        Tensor g_target = set_sum_gradient(model, *trace, alive, target_category);
        double target_sum = set_sum(heat, alive, target_category);

        int best = -1;
        double best_ratio = 0.0, best_score = 0.0, best_norm = 0.0;
        Tensor best_w;
        for (int k = 0; k < n; ++k) {
            if (k == target_category) continue;
            Tensor w_k = set_sum_gradient(model, *trace, alive, k);
            w_k.add_scaled(g_target, -1.0);
            double norm = l2_norm(w_k);
            if (norm < 1e-12) continue;
            double score = set_sum(heat, alive, k);
            if (config.score_mode == DeepFoolScoreMode::Difference) score -= target_sum;
            double ratio = std::fabs(score) / norm;
            if (best < 0 || ratio < best_ratio) {
                best = k;
                best_ratio = ratio;
                best_score = score;
                best_norm = norm;
                best_w = std::move(w_k);
            }
        }
        if (best < 0) break; // every candidate direction vanished

        double scale = std::fabs(best_score) / (best_norm * best_norm);
        if (config.df_step_cap > 0.0) {
            double step_linf = scale * best_w.max_abs();
            if (step_linf > config.df_step_cap) scale *= config.df_step_cap / step_linf;
        }
        Tensor next = result.point;
        next.add_scaled(best_w, scale);
        next.clamp(0.0, 255.0);

        auto next_trace = model.forward_trace(next);
        // Internal pruning is argmax-only: the dense point must actually
        // cross label boundaries or the boundary normal at x^B cancels to
        // zero. The configured criterion governs the outer set update.
        alive = remove_pixels(trace->output.heatmap, next_trace->output.heatmap,
                              alive, target_category, config.t_attack, RemoveCriterion::Argmax);
        result.point = std::move(next);
        trace = std::move(next_trace);
        ++result.iterations;
    }
    result.completed = alive.empty();
    return result;
}

Hyperplane approx_boundary(const DetectorModel& model, const Tensor& x_boundary,
                           const Tensor& image, const std::vector<Cell>& targets) {
    auto trace_b = model.forward_trace(x_boundary);
    Tensor heat_clean = model.forward(image).heatmap;
    const Tensor& heat_b = trace_b->output.heatmap;

    // Adversarial-label and clean-label sums share the gradient pass: label
    // pairs that coincide cancel exactly.
    Tensor d_heat = Tensor::zeros_like(heat_b);
    for (const Cell& p : targets) {
        d_heat.at(p.row, p.col, cell_argmax(heat_b, p.row, p.col)) += 1.0;
        d_heat.at(p.row, p.col, cell_argmax(heat_clean, p.row, p.col)) -= 1.0;
    }
    Tensor w = model.input_gradient(*trace_b, d_heat);
    double norm = l2_norm(w);
    if (norm < 1e-12) throw DegenerateBoundary();
    for (size_t i = 0; i < w.size(); ++i) w[i] /= norm;
    return Hyperplane{std::move(w), x_boundary};
}

LinearSolverResult linear_solver(const Tensor& x, const Hyperplane& plane,
                                 const PixelBounds& bounds, double overshoot) {
    const Tensor& w = plane.normal;
    if (!x.same_shape(w) || !x.same_shape(plane.anchor))
        throw std::invalid_argument("linear_solver: shape mismatch");

    LinearSolverResult result;
    result.point = x;
    Tensor& p = result.point;

    double rho = 0.0;
    for (size_t i = 0; i < x.size(); ++i) rho += w[i] * (x[i] - plane.anchor[i]);

    if (rho < 0.0) {
        // Coordinates in decreasing |w| order, lowest index first on ties.
        std::vector<size_t> order(x.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return std::fabs(w[a]) > std::fabs(w[b]);
        });
        for (size_t idx : order) {
            if (rho >= 0.0) break;
            double wi = w[idx];
            if (wi == 0.0) break; // zeros sort last
            double moved = std::clamp(p[idx] - rho / wi, bounds.lo[idx], bounds.hi[idx]);
            rho += wi * (moved - p[idx]);
            p[idx] = moved;
        }
    }
    result.margin = rho;
    result.crossed = rho >= -1e-9;

    if (result.crossed && overshoot > 0.0) {
        for (size_t i = 0; i < p.size(); ++i) {
            double stepped = x[i] + (1.0 + overshoot) * (p[i] - x[i]);
            p[i] = std::clamp(stepped, bounds.lo[i], bounds.hi[i]);
        }
    }
    for (size_t i = 0; i < p.size(); ++i)
        if (p[i] != x[i]) ++result.changed_coords;
    return result;
}

AttackReport sca_attack(const DetectorModel& model, const Tensor& image,
                        const ScaConfig& config, AttackTrace* trace) {
    auto t_start = std::chrono::steady_clock::now();
    AttackReport report;

    const PixelBounds bounds = eps_box(image, config.eps_s);
    Tensor x = image;
    auto cur = model.forward_trace(x);
    TargetPixelSet targets = select_targets(cur->output.heatmap, config.t_attack);

    while (!targets.empty() && report.outer_iterations < config.outer_guard) {
        ++report.outer_iterations;
        const Tensor& heat = cur->output.heatmap;

        // K = argmax_k sum_p softmax_{C_k} f(x, p) over the surviving sets.
        int attack_cat = -1;
        double best_score = 0.0;
        for (const auto& [cat, cells] : targets.sets) {
            if (cells.empty()) continue;
            double s = category_score(heat, cells, cat);
            if (attack_cat < 0 || s > best_score) {
                attack_cat = cat;
                best_score = s;
            }
        }
        if (trace) trace->attacked_scores.push_back(best_score);

        std::vector<Cell>& target_set = targets.sets[attack_cat];
        for (int j = 1; j <= config.max_inner_iters && !target_set.empty(); ++j) {
            ++report.inner_iterations;

            DeepFoolResult df = cw_deepfool(model, x, target_set, attack_cat, config);
            report.deepfool_iterations += df.iterations;

            Tensor x_next;
            int dense_changed = 0;
            for (size_t i = 0; i < x.size(); ++i)
                if (df.point[i] != x[i]) ++dense_changed;
            try {
                Hyperplane plane = approx_boundary(model, df.point, x, target_set);
                LinearSolverResult ls = linear_solver(x, plane, bounds, config.overshoot);
                x_next = std::move(ls.point);
                if (trace) {
                    int support = 0;
                    for (size_t i = 0; i < plane.normal.size(); ++i)
                        if (plane.normal[i] != 0.0) ++support;
                    trace->normal_support.push_back(support);
                    trace->dense_changed.push_back(dense_changed);
                    trace->sparse_changed.push_back(ls.changed_coords);
                    trace->crossed.push_back(ls.crossed);
                    if (ls.crossed) trace->crossing_margins.push_back(ls.margin);
                }
            } catch (const DegenerateBoundary&) {
                // Keep the dense DeepFool point for this iteration, inside the box.
                ++report.degenerate_boundaries;
                x_next = clip_to_bounds(df.point, bounds);
            }

            auto next_trace = model.forward_trace(x_next);
            std::vector<Cell> kept =
                remove_pixels(cur->output.heatmap, next_trace->output.heatmap,
                              target_set, attack_cat, config.t_attack, config.criterion);

            bool stalled = x_next == x && kept.size() == target_set.size();
            target_set = std::move(kept);
            x = std::move(x_next);
            cur = std::move(next_trace);
            if (trace) {
                trace->iterates.push_back(x);
                trace->sets_after.push_back(targets.sets);
            }
            if (stalled) {
                ++report.stalled_iterations;
                break; // identical state would repeat; let the outer loop accumulate
            }
        }
        if (target_set.empty()) targets.sets.erase(attack_cat);
    }

    report.success = targets.empty();
    for (const auto& [cat, cells] : targets.sets)
        report.surviving_pixels += static_cast<int>(cells.size());

    report.adversarial = quantize_to_grid(x, bounds);

    report.budget_ok = true;
    for (size_t i = 0; i < image.size(); ++i) {
        double v = report.adversarial[i];
        if (v < bounds.lo[i] - 1e-9 || v > bounds.hi[i] + 1e-9 || v < 0.0 || v > 255.0)
            report.budget_ok = false;
    }
    report.linf = linf_distance(report.adversarial, image);

    double sq = 0.0;
    size_t changed_locations = 0;
    for (int yy = 0; yy < image.height(); ++yy)
        for (int xx = 0; xx < image.width(); ++xx) {
            bool changed = false;
            for (int cc = 0; cc < image.channels(); ++cc) {
                double d = report.adversarial.at(yy, xx, cc) - image.at(yy, xx, cc);
                sq += (d / 255.0) * (d / 255.0);
                if (std::fabs(d) > 0.5) changed = true;
            }
            if (changed) ++changed_locations;
        }
    report.p_l2 = std::sqrt(sq / static_cast<double>(image.size()));
    report.p_l0 = static_cast<double>(changed_locations) /
                  (static_cast<double>(image.height()) * image.width());

    DetectorOutput final_out = model.forward(report.adversarial);
    report.detections = decode_detections(final_out, image.height(), image.width(),
                                          config.decode_k_max, config.decode_conf);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

} // namespace cwatt
