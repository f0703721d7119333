// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/dca.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace cwatt {

namespace {

constexpr double kZeroGradTol = 1e-12;

void cross_entropy_at(const Tensor& heatmap, const Cell& p, int category,
                      double* loss, Tensor* d_heat) {
    std::vector<double> sm = cell_softmax(heatmap, p.row, p.col);
    constexpr double eps = 1e-300;
    if (loss) *loss += -std::log(std::max(sm[category], eps));
    if (d_heat)
        for (int m = 0; m < heatmap.channels(); ++m)
            d_heat->at(p.row, p.col, m) += sm[m] - (m == category ? 1.0 : 0.0);
}

} // namespace

double category_loss(const Tensor& heatmap, const std::vector<Cell>& cells, int category) {
    if (cells.empty()) throw std::invalid_argument("category_loss: empty target set");
    double loss = 0.0;
    for (const Cell& p : cells) cross_entropy_at(heatmap, p, category, &loss, nullptr);
    if (!std::isfinite(loss)) throw std::runtime_error("category_loss: non-finite loss");
    return loss;
}

double category_loss(const DetectorModel& model, const Tensor& image,
                     const std::vector<Cell>& cells, int category) {
    return category_loss(model.forward(image).heatmap, cells, category);
}

Tensor category_gradient(const DetectorModel& model, const Tensor& image,
                         const std::vector<Cell>& cells, int category, bool* near_zero) {
    if (cells.empty()) throw std::invalid_argument("category_gradient: empty target set");
    auto trace = model.forward_trace(image);
    Tensor d_heat = Tensor::zeros_like(trace->output.heatmap);
    for (const Cell& p : cells) cross_entropy_at(trace->output.heatmap, p, category, nullptr, &d_heat);
    Tensor r = model.input_gradient(*trace, d_heat);
    double ninf = r.max_abs();
    if (near_zero) *near_zero = ninf < kZeroGradTol;
    if (ninf < kZeroGradTol) {
        r.fill(0.0);
        return r;
    }
    for (size_t i = 0; i < r.size(); ++i) r[i] /= ninf;
    return r;
}

AttackReport dca_attack(const DetectorModel& model, const Tensor& image,
                        const DcaConfig& config, AttackTrace* trace) {
    if (config.eps_d <= 0.0 || config.max_iters < 1)
        throw std::invalid_argument("dca_attack: need eps_d > 0 and max_iters >= 1");
    auto t_start = std::chrono::steady_clock::now();
    AttackReport report;

    const double step = config.eps_d / config.max_iters;
    Tensor x = image;
    auto cur = model.forward_trace(x);
    TargetPixelSet targets = select_targets(cur->output.heatmap, config.t_attack);

    for (int i = 1; i <= config.max_iters && !targets.empty(); ++i) {
        ++report.outer_iterations;

        Tensor r_total = Tensor::zeros_like(x);
        for (const auto& [cat, cells] : targets.sets) {
            if (cells.empty()) continue;
            Tensor d_heat = Tensor::zeros_like(cur->output.heatmap);
            for (const Cell& p : cells)
                cross_entropy_at(cur->output.heatmap, p, cat, nullptr, &d_heat);
            Tensor r = model.input_gradient(*cur, d_heat);
            double ninf = r.max_abs();
            if (ninf < kZeroGradTol) {
                ++report.zero_gradient_events;
                continue;
            }
            r_total.add_scaled(r, 1.0 / ninf);
        }

        // pert_i = (eps_D / M_D) * sign(r_i), with sign(0) = 0.
        Tensor pert = Tensor::zeros_like(x);
        for (size_t k = 0; k < pert.size(); ++k)
            pert[k] = r_total[k] > 0.0 ? step : (r_total[k] < 0.0 ? -step : 0.0);
        if (trace) trace->step_deltas.push_back(pert);

        Tensor x_next = x;
        x_next.add_scaled(pert, 1.0);
        x_next.clamp(0.0, 255.0);

        auto next_trace = model.forward_trace(x_next);
        for (auto it = targets.sets.begin(); it != targets.sets.end();) {
            it->second = remove_pixels(cur->output.heatmap, next_trace->output.heatmap,
                                       it->second, it->first, config.t_attack, config.criterion);
            if (it->second.empty())
                it = targets.sets.erase(it);
            else
                ++it;
        }
        x = std::move(x_next);
        cur = std::move(next_trace);
        if (trace) {
            trace->iterates.push_back(x);
            trace->sets_after.push_back(targets.sets);
        }
    }

    report.success = targets.empty();
    for (const auto& [cat, cells] : targets.sets)
        report.surviving_pixels += static_cast<int>(cells.size());

    report.adversarial = quantize_to_grid(x, abs_box(image, config.eps_d));

    report.budget_ok = true;
    double sq = 0.0;
    size_t changed_locations = 0;
    for (int yy = 0; yy < image.height(); ++yy)
        for (int xx = 0; xx < image.width(); ++xx) {
            bool changed = false;
            for (int cc = 0; cc < image.channels(); ++cc) {
                double v = report.adversarial.at(yy, xx, cc);
                double d = v - image.at(yy, xx, cc);
                if (std::fabs(d) > config.eps_d + 1e-9 || v < 0.0 || v > 255.0)
                    report.budget_ok = false;
                sq += (d / 255.0) * (d / 255.0);
                if (std::fabs(d) > 0.5) changed = true;
            }
            if (changed) ++changed_locations;
        }
    report.linf = linf_distance(report.adversarial, image);
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
