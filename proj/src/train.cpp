// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "cwatt/parallel.hpp"
#include "cwatt/rng.hpp"

namespace cwatt {

namespace {

// CornerNet-style radius: smallest of the three IoU-preserving cases.
double gaussian_radius(double height, double width, double min_overlap = 0.7) {
    double a1 = 1.0;
    double b1 = height + width;
    double c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap);
    double r1 = (b1 - std::sqrt(std::max(0.0, b1 * b1 - 4.0 * a1 * c1))) / (2.0 * a1);

    double a2 = 4.0;
    double b2 = 2.0 * (height + width);
    double c2 = (1.0 - min_overlap) * width * height;
    double r2 = (b2 - std::sqrt(std::max(0.0, b2 * b2 - 4.0 * a2 * c2))) / (2.0 * a2);

    double a3 = 4.0 * min_overlap;
    double b3 = -2.0 * min_overlap * (height + width);
    double c3 = (min_overlap - 1.0) * width * height;
    double r3 = (-b3 + std::sqrt(std::max(0.0, b3 * b3 - 4.0 * a3 * c3))) / (2.0 * a3);

    return std::max(0.0, std::min({r1, r2, r3}));
}

void draw_gaussian(Tensor& heat, int category, int cx, int cy, double radius) {
    int r = static_cast<int>(radius);
    double diameter = 2.0 * radius + 1.0;
    double sigma = diameter / 6.0;
    double two_sigma2 = 2.0 * sigma * sigma;
    for (int dy = -r; dy <= r; ++dy) {
        int y = cy + dy;
        if (y < 0 || y >= heat.height()) continue;
        for (int dx = -r; dx <= r; ++dx) {
            int x = cx + dx;
            if (x < 0 || x >= heat.width()) continue;
            double v = std::exp(-(dx * dx + dy * dy) / two_sigma2);
            double& cell = heat.at(y, x, category);
            cell = std::max(cell, v);
        }
    }
}

} // namespace

TrainTargets build_targets(const std::vector<GroundTruthBox>& truths,
                           int image_height, int image_width, int stride, int categories) {
    TrainTargets t;
    int hh = image_height / stride, hw = image_width / stride;
    t.heatmap = Tensor(hh, hw, categories);
    t.size = Tensor(hh, hw, 2);
    t.mask = Tensor(hh, hw, 1);

    for (const GroundTruthBox& gt : truths) {
        double w_cells = (gt.box.x2 - gt.box.x1) / stride;
        double h_cells = (gt.box.y2 - gt.box.y1) / stride;
        // Nearest cell to the box center: decoded centers land at cell*stride,
        // so rounding halves the worst-case decode offset versus truncation.
        int cx = static_cast<int>(std::lround((gt.box.x1 + gt.box.x2) / 2.0 / stride));
        int cy = static_cast<int>(std::lround((gt.box.y1 + gt.box.y2) / 2.0 / stride));
        cx = std::clamp(cx, 0, hw - 1);
        cy = std::clamp(cy, 0, hh - 1);
        double radius = gaussian_radius(h_cells, w_cells);
        draw_gaussian(t.heatmap, gt.category, cx, cy, radius);
        t.heatmap.at(cy, cx, gt.category) = 1.0;
        t.size.at(cy, cx, 0) = w_cells;
        t.size.at(cy, cx, 1) = h_cells;
        t.mask.at(cy, cx, 0) = 1.0;
        ++t.num_centers;
    }
    return t;
}

double detection_loss(const DetectorOutput& output, const TrainTargets& targets,
                      const TrainConfig& config, Tensor& d_heatmap, Tensor& d_sizemap) {
    const Tensor& pred = output.heatmap;
    d_heatmap = Tensor::zeros_like(pred);
    d_sizemap = Tensor::zeros_like(output.sizemap);

    const double n_pos = std::max(1, targets.num_centers);
    const double alpha = config.focal_alpha;
    const double beta = config.focal_beta;
    constexpr double eps = 1e-12;

    double focal = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double y = std::clamp(pred[i], eps, 1.0 - eps);
        double t = targets.heatmap[i];
        if (t >= 1.0) {
            double om = 1.0 - y;
            focal -= std::pow(om, alpha) * std::log(y);
            d_heatmap[i] = (alpha * std::pow(om, alpha - 1.0) * std::log(y) -
                            std::pow(om, alpha) / y) / n_pos;
        } else {
            double wn = std::pow(1.0 - t, beta);
            focal -= wn * std::pow(y, alpha) * std::log(1.0 - y);
            d_heatmap[i] = -wn * (alpha * std::pow(y, alpha - 1.0) * std::log(1.0 - y) -
                                  std::pow(y, alpha) / (1.0 - y)) / n_pos;
        }
    }
    focal /= n_pos;

    double size_l1 = 0.0;
    for (int yc = 0; yc < targets.mask.height(); ++yc) {
        for (int xc = 0; xc < targets.mask.width(); ++xc) {
            if (targets.mask.at(yc, xc, 0) < 1.0) continue;
            for (int c = 0; c < 2; ++c) {
                double diff = output.sizemap.at(yc, xc, c) - targets.size.at(yc, xc, c);
                size_l1 += std::fabs(diff);
                d_sizemap.at(yc, xc, c) =
                    config.size_loss_weight * (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) / n_pos;
            }
        }
    }
    size_l1 /= n_pos;

    return focal + config.size_loss_weight * size_l1;
}

namespace {

struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int64_t step_count = 0;
    NetGradients m, v;

    Adam(const ToyDetector& model, double lr_) : lr(lr_), m(model.make_gradients()), v(model.make_gradients()) {}

    void step(ToyDetector& model, const NetGradients& g, double lr_now) {
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        auto& layers = model.layers();
        for (size_t li = 0; li < layers.size(); ++li) {
            auto update = [&](std::vector<double>& param, const std::vector<double>& grad,
                              std::vector<double>& mm, std::vector<double>& vv) {
                for (size_t i = 0; i < param.size(); ++i) {
                    mm[i] = beta1 * mm[i] + (1.0 - beta1) * grad[i];
                    vv[i] = beta2 * vv[i] + (1.0 - beta2) * grad[i] * grad[i];
                    double mhat = mm[i] / bc1;
                    double vhat = vv[i] / bc2;
                    param[i] -= lr_now * mhat / (std::sqrt(vhat) + eps);
                }
            };
            update(layers[li].weights, g.weights[li], m.weights[li], v.weights[li]);
            update(layers[li].bias, g.biases[li], m.biases[li], v.biases[li]);
        }
    }
};

} // namespace

std::unique_ptr<ToyDetector> train_toy_detector(const std::vector<TrainExample>& dataset,
                                                const TrainConfig& config) {
    if (dataset.empty()) throw std::invalid_argument("train_toy_detector: empty dataset");

    Rng rng(config.seed);
    auto model = std::make_unique<ToyDetector>(config.categories, rng.next_u64());

    // Targets are fixed per example; build them once.
    std::vector<TrainTargets> targets(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i)
        targets[i] = build_targets(dataset[i].truths, dataset[i].image.height(),
                                   dataset[i].image.width(), model->stride(), model->categories());

    if (config.epochs <= 0) return model;

    Adam adam(*model, config.learning_rate);
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    const int batch = std::max(1, config.batch_size);
    std::vector<NetGradients> local(batch, model->make_gradients());
    std::vector<double> local_loss(batch, 0.0);
    NetGradients total = model->make_gradients();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates shuffle driven by the run RNG.
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);

        double lr_now = config.learning_rate *
                        (epoch >= config.lr_drop_epoch ? config.lr_drop : 1.0);
        double epoch_loss = 0.0;
        int batches = 0;

        for (size_t start = 0; start < order.size(); start += batch) {
            int count = static_cast<int>(std::min(order.size() - start, static_cast<size_t>(batch)));
            parallel_for(0, count, config.threads, [&](int b) {
                size_t idx = order[start + b];
                const TrainExample& ex = dataset[idx];
                Tensor image = ex.image;
                if (config.noise_sigma > 0.0) {
                    // Per-(epoch, slot) stream keeps augmentation independent
                    // of the thread schedule.
                    Rng noise(Rng(config.seed).fork(1 + static_cast<uint64_t>(epoch) * 1000003 +
                                                    start + b).next_u64());
                    for (size_t i = 0; i < image.size(); ++i)
                        image[i] = std::clamp(image[i] + config.noise_sigma * noise.normal(), 0.0, 255.0);
                }
                auto trace = model->forward_trace(image);
                Tensor d_heat, d_size;
                local_loss[b] = detection_loss(trace->output, targets[idx], config, d_heat, d_size);
                local[b].zero();
                model->backward_params(*trace, d_heat, d_size, local[b]);
            });

            total.zero();
            double batch_loss = 0.0;
            for (int b = 0; b < count; ++b) {
                total.add(local[b], 1.0 / count);
                batch_loss += local_loss[b] / count;
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train_toy_detector: loss diverged (non-finite)");
            adam.step(*model, total, lr_now);
            epoch_loss += batch_loss;
            ++batches;
        }

        if (config.verbose)
            std::fprintf(stderr, "epoch %3d  loss %.5f  lr %.2e\n", epoch + 1,
                         epoch_loss / std::max(1, batches), lr_now);
    }
    return model;
}

} // namespace cwatt
