// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#include "cwatt/toy_net.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cwatt/rng.hpp"

namespace cwatt {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Patch matrix for one layer: rows = output positions (row-major),
// columns = (ky, kx, cin). Out-of-bounds taps contribute zero.
MatRM im2col(const Tensor& in, const ConvLayer& l) {
    const int oh = l.out_dim(in.height());
    const int ow = l.out_dim(in.width());
    const int k = l.kernel, cin = l.in_ch;
    MatRM patches = MatRM::Zero(static_cast<Eigen::Index>(oh) * ow, static_cast<Eigen::Index>(k) * k * cin);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            Eigen::Index row = static_cast<Eigen::Index>(oy) * ow + ox;
            for (int ky = 0; ky < k; ++ky) {
                int iy = oy * l.stride - l.pad + ky * l.dilation;
                if (iy < 0 || iy >= in.height()) continue;
                for (int kx = 0; kx < k; ++kx) {
                    int ix = ox * l.stride - l.pad + kx * l.dilation;
                    if (ix < 0 || ix >= in.width()) continue;
                    const double* src = in.data() + (static_cast<size_t>(iy) * in.width() + ix) * cin;
                    double* dst = patches.data() + row * patches.cols() + (static_cast<size_t>(ky) * k + kx) * cin;
                    std::memcpy(dst, src, sizeof(double) * cin);
                }
            }
        }
    }
    return patches;
}

// Scatter-add of the patch-space gradient back to input space.
void col2im(const MatRM& d_patches, const ConvLayer& l, Tensor& d_in) {
    const int oh = l.out_dim(d_in.height());
    const int ow = l.out_dim(d_in.width());
    const int k = l.kernel, cin = l.in_ch;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            Eigen::Index row = static_cast<Eigen::Index>(oy) * ow + ox;
            for (int ky = 0; ky < k; ++ky) {
                int iy = oy * l.stride - l.pad + ky * l.dilation;
                if (iy < 0 || iy >= d_in.height()) continue;
                for (int kx = 0; kx < k; ++kx) {
                    int ix = ox * l.stride - l.pad + kx * l.dilation;
                    if (ix < 0 || ix >= d_in.width()) continue;
                    const double* src = d_patches.data() + row * d_patches.cols() + (static_cast<size_t>(ky) * k + kx) * cin;
                    double* dst = d_in.data() + (static_cast<size_t>(iy) * d_in.width() + ix) * cin;
                    for (int c = 0; c < cin; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

// z = conv(in); returns pre-activation tensor.
Tensor conv_forward(const Tensor& in, const ConvLayer& l) {
    const int oh = l.out_dim(in.height());
    const int ow = l.out_dim(in.width());
    MatRM patches = im2col(in, l);
    ConstMapRM w(l.weights.data(), static_cast<Eigen::Index>(l.kernel) * l.kernel * l.in_ch, l.out_ch);
    Tensor z(oh, ow, l.out_ch);
    MapRM zm(z.data(), patches.rows(), l.out_ch);
    zm.noalias() = patches * w;
    for (Eigen::Index r = 0; r < zm.rows(); ++r)
        for (int c = 0; c < l.out_ch; ++c) zm(r, c) += l.bias[c];
    return z;
}

// Input-space gradient given dz (pre-activation gradient).
Tensor conv_backward_input(const Tensor& dz, const ConvLayer& l, int in_h, int in_w) {
    ConstMapRM w(l.weights.data(), static_cast<Eigen::Index>(l.kernel) * l.kernel * l.in_ch, l.out_ch);
    ConstMapRM dzm(dz.data(), static_cast<Eigen::Index>(dz.height()) * dz.width(), l.out_ch);
    MatRM d_patches = dzm * w.transpose();
    Tensor d_in(in_h, in_w, l.in_ch);
    col2im(d_patches, l, d_in);
    return d_in;
}

// Parameter gradients given the layer input and dz; accumulates into dw/db.
void conv_backward_params(const Tensor& in, const Tensor& dz, const ConvLayer& l,
                          std::vector<double>& dw, std::vector<double>& db) {
    MatRM patches = im2col(in, l);
    ConstMapRM dzm(dz.data(), patches.rows(), l.out_ch);
    MapRM dwm(dw.data(), patches.cols(), l.out_ch);
    dwm.noalias() += patches.transpose() * dzm;
    for (Eigen::Index r = 0; r < dzm.rows(); ++r)
        for (int c = 0; c < l.out_ch; ++c) db[c] += dzm(r, c);
}

constexpr double kPixelScale = 1.0 / 255.0;
constexpr uint32_t kArchStride4V1 = 1;

} // namespace

void NetGradients::zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void NetGradients::add(const NetGradients& other, double scale) {
    for (size_t i = 0; i < weights.size(); ++i) {
        for (size_t j = 0; j < weights[i].size(); ++j) weights[i][j] += scale * other.weights[i][j];
        for (size_t j = 0; j < biases[i].size(); ++j) biases[i][j] += scale * other.biases[i][j];
    }
}

struct ToyDetector::Trace : ModelTrace {
    Tensor input_norm;             // normalized input
    std::vector<Tensor> pre;       // trunk pre-activations z_i
    std::vector<Tensor> act;       // trunk activations a_i
    Tensor heat_pre;               // heat head pre-sigmoid
};

ToyDetector::ToyDetector(int categories, uint64_t init_seed)
    : categories_(categories), init_seed_(init_seed) {
    if (categories < 2) throw std::invalid_argument("ToyDetector: need at least 2 categories");

    auto make = [](int in, int out, int k, int s, int p, int d) {
        ConvLayer l;
        l.in_ch = in; l.out_ch = out; l.kernel = k; l.stride = s; l.pad = p; l.dilation = d;
        l.weights.resize(l.weight_count());
        l.bias.assign(out, 0.0);
        return l;
    };

    layers_.push_back(make(3, 8, 3, 2, 1, 1));
    layers_.push_back(make(8, 16, 3, 2, 1, 1));
    layers_.push_back(make(16, 16, 3, 1, 1, 1));
    layers_.push_back(make(16, 16, 3, 1, 2, 2));
    trunk_count_ = static_cast<int>(layers_.size());
    layers_.push_back(make(16, categories, 1, 1, 0, 1)); // heatmap head (sigmoid)
    layers_.push_back(make(16, 2, 1, 1, 0, 1));          // size head (linear)

    Rng rng(init_seed);
    for (int i = 0; i < trunk_count_; ++i) {
        ConvLayer& l = layers_[i];
        double fan_in = static_cast<double>(l.kernel) * l.kernel * l.in_ch;
        double sd = std::sqrt(2.0 / fan_in);
        for (double& w : l.weights) w = sd * rng.normal();
    }
    for (size_t i = trunk_count_; i < layers_.size(); ++i) {
        ConvLayer& l = layers_[i];
        double sd = std::sqrt(1.0 / l.in_ch);
        for (double& w : l.weights) w = sd * rng.normal();
    }
    // Start the logistic head near score 0.1 and the size head near a
    // typical box side so early training is stable.
    std::fill(layers_[trunk_count_].bias.begin(), layers_[trunk_count_].bias.end(), -2.19);
    std::fill(layers_[trunk_count_ + 1].bias.begin(), layers_[trunk_count_ + 1].bias.end(), 4.0);
}

DetectorOutput ToyDetector::forward(const Tensor& image) const {
    return forward_trace(image)->output;
}

std::unique_ptr<ModelTrace> ToyDetector::forward_trace(const Tensor& image) const {
    if (image.channels() != image_channels())
        throw std::invalid_argument("ToyDetector: expected a 3-channel image");
    if (image.height() <= 0 || image.width() <= 0 ||
        image.height() % stride() != 0 || image.width() % stride() != 0)
        throw std::invalid_argument("ToyDetector: image dimensions must be positive multiples of the stride");

    auto trace = std::make_unique<Trace>();
    trace->input_norm = image;
    for (size_t i = 0; i < trace->input_norm.size(); ++i)
        trace->input_norm[i] = trace->input_norm[i] * kPixelScale - 0.5;

    const Tensor* cur = &trace->input_norm;
    for (int i = 0; i < trunk_count_; ++i) {
        Tensor z = conv_forward(*cur, layers_[i]);
        Tensor a = Tensor::zeros_like(z);
        for (size_t j = 0; j < z.size(); ++j) a[j] = softplus(z[j]);
        trace->pre.push_back(std::move(z));
        trace->act.push_back(std::move(a));
        cur = &trace->act.back();
    }

    trace->heat_pre = conv_forward(*cur, layers_[trunk_count_]);
    Tensor heat = Tensor::zeros_like(trace->heat_pre);
    for (size_t j = 0; j < heat.size(); ++j) heat[j] = sigmoid(trace->heat_pre[j]);

    trace->output.heatmap = std::move(heat);
    trace->output.sizemap = conv_forward(*cur, layers_[trunk_count_ + 1]);
    trace->output.stride = stride();
    return trace;
}

Tensor ToyDetector::input_gradient(const ModelTrace& trace_base, const Tensor& d_heatmap) const {
    const auto& trace = static_cast<const Trace&>(trace_base);
    if (!d_heatmap.same_shape(trace.output.heatmap))
        throw std::invalid_argument("input_gradient: heatmap gradient shape mismatch");

    // Through the logistic head.
    Tensor dz_heat = Tensor::zeros_like(d_heatmap);
    for (size_t j = 0; j < dz_heat.size(); ++j) {
        double y = trace.output.heatmap[j];
        dz_heat[j] = d_heatmap[j] * y * (1.0 - y);
    }
    Tensor d_act = conv_backward_input(dz_heat, layers_[trunk_count_],
                                       trace.act.back().height(), trace.act.back().width());

    // Through the trunk.
    for (int i = trunk_count_ - 1; i >= 0; --i) {
        Tensor dz = Tensor::zeros_like(trace.pre[i]);
        for (size_t j = 0; j < dz.size(); ++j)
            dz[j] = d_act[j] * sigmoid(trace.pre[i][j]); // softplus' = sigmoid
        const Tensor& in = i == 0 ? trace.input_norm : trace.act[i - 1];
        d_act = conv_backward_input(dz, layers_[i], in.height(), in.width());
    }

    for (size_t j = 0; j < d_act.size(); ++j) d_act[j] *= kPixelScale;
    return d_act;
}

void ToyDetector::backward_params(const ModelTrace& trace_base, const Tensor& d_heatmap,
                                  const Tensor& d_sizemap, NetGradients& out) const {
    const auto& trace = static_cast<const Trace&>(trace_base);
    const Tensor& head_in = trace.act.back();

    Tensor dz_heat = Tensor::zeros_like(d_heatmap);
    for (size_t j = 0; j < dz_heat.size(); ++j) {
        double y = trace.output.heatmap[j];
        dz_heat[j] = d_heatmap[j] * y * (1.0 - y);
    }
    conv_backward_params(head_in, dz_heat, layers_[trunk_count_],
                         out.weights[trunk_count_], out.biases[trunk_count_]);
    conv_backward_params(head_in, d_sizemap, layers_[trunk_count_ + 1],
                         out.weights[trunk_count_ + 1], out.biases[trunk_count_ + 1]);

    Tensor d_act = conv_backward_input(dz_heat, layers_[trunk_count_], head_in.height(), head_in.width());
    Tensor d_size_in = conv_backward_input(d_sizemap, layers_[trunk_count_ + 1], head_in.height(), head_in.width());
    d_act.add_scaled(d_size_in, 1.0);

    for (int i = trunk_count_ - 1; i >= 0; --i) {
        Tensor dz = Tensor::zeros_like(trace.pre[i]);
        for (size_t j = 0; j < dz.size(); ++j)
            dz[j] = d_act[j] * sigmoid(trace.pre[i][j]);
        const Tensor& in = i == 0 ? trace.input_norm : trace.act[i - 1];
        conv_backward_params(in, dz, layers_[i], out.weights[i], out.biases[i]);
        if (i > 0) d_act = conv_backward_input(dz, layers_[i], in.height(), in.width());
    }
}

NetGradients ToyDetector::make_gradients() const {
    NetGradients g;
    for (const ConvLayer& l : layers_) {
        g.weights.emplace_back(l.weights.size(), 0.0);
        g.biases.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

size_t ToyDetector::parameter_count() const {
    size_t n = 0;
    for (const ConvLayer& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

namespace {

constexpr char kMagic[8] = {'C', 'W', 'A', 'T', 'T', 'M', 'D', 'L'};
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("model archive: truncated file");
    return v;
}

} // namespace

void save_model(const ToyDetector& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open model archive for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kFormatVersion);
    write_pod(os, kArchStride4V1);
    write_pod(os, static_cast<uint32_t>(model.stride()));
    write_pod(os, static_cast<uint32_t>(model.categories()));
    write_pod(os, model.init_seed());
    write_pod(os, static_cast<uint32_t>(model.layers().size()));
    for (const ConvLayer& l : model.layers()) {
        write_pod(os, static_cast<uint32_t>(l.in_ch));
        write_pod(os, static_cast<uint32_t>(l.out_ch));
        write_pod(os, static_cast<uint32_t>(l.kernel));
        write_pod(os, static_cast<uint32_t>(l.stride));
        write_pod(os, static_cast<uint32_t>(l.pad));
        write_pod(os, static_cast<uint32_t>(l.dilation));
        write_pod(os, static_cast<uint64_t>(l.weights.size()));
        os.write(reinterpret_cast<const char*>(l.weights.data()),
                 static_cast<std::streamsize>(l.weights.size() * sizeof(double)));
        write_pod(os, static_cast<uint64_t>(l.bias.size()));
        os.write(reinterpret_cast<const char*>(l.bias.data()),
                 static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("model archive: write failed: " + path);
}

std::unique_ptr<ToyDetector> load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model archive: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("model archive: bad magic: " + path);
    uint32_t version = read_pod<uint32_t>(is);
    if (version != kFormatVersion)
        throw std::runtime_error("model archive: unsupported format version");
    uint32_t arch = read_pod<uint32_t>(is);
    if (arch != kArchStride4V1)
        throw std::runtime_error("model archive: unknown architecture id");
    uint32_t stride = read_pod<uint32_t>(is);
    uint32_t categories = read_pod<uint32_t>(is);
    uint64_t seed = read_pod<uint64_t>(is);
    uint32_t layer_count = read_pod<uint32_t>(is);

    auto model = std::make_unique<ToyDetector>(static_cast<int>(categories), seed);
    if (stride != static_cast<uint32_t>(model->stride()) ||
        layer_count != model->layers().size())
        throw std::runtime_error("model archive: architecture metadata mismatch");

    for (ConvLayer& l : model->layers()) {
        uint32_t in = read_pod<uint32_t>(is), out = read_pod<uint32_t>(is);
        uint32_t k = read_pod<uint32_t>(is), s = read_pod<uint32_t>(is);
        uint32_t p = read_pod<uint32_t>(is), d = read_pod<uint32_t>(is);
        if (in != static_cast<uint32_t>(l.in_ch) || out != static_cast<uint32_t>(l.out_ch) ||
            k != static_cast<uint32_t>(l.kernel) || s != static_cast<uint32_t>(l.stride) ||
            p != static_cast<uint32_t>(l.pad) || d != static_cast<uint32_t>(l.dilation))
            throw std::runtime_error("model archive: layer shape mismatch");
        uint64_t wn = read_pod<uint64_t>(is);
        if (wn != l.weights.size()) throw std::runtime_error("model archive: weight count mismatch");
        is.read(reinterpret_cast<char*>(l.weights.data()),
                static_cast<std::streamsize>(wn * sizeof(double)));
        uint64_t bn = read_pod<uint64_t>(is);
        if (bn != l.bias.size()) throw std::runtime_error("model archive: bias count mismatch");
        is.read(reinterpret_cast<char*>(l.bias.data()),
                static_cast<std::streamsize>(bn * sizeof(double)));
        if (!is) throw std::runtime_error("model archive: truncated file");
    }
    return model;
}

} // namespace cwatt
