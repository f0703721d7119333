// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwatt/tensor.hpp"

namespace cwatt {

/// 8-bit interleaved image buffer (the on-disk representation).
struct ImageU8 {
    int height = 0, width = 0, channels = 0;
    std::vector<uint8_t> data;
};

/// Round-to-nearest with clamping into [0, 255].
ImageU8 tensor_to_u8(const Tensor& t);
Tensor u8_to_tensor(const ImageU8& img);

void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

std::vector<uint8_t> jpeg_encode(const ImageU8& img, int quality);
ImageU8 jpeg_decode(const uint8_t* data, size_t size);

/// Baseline JPEG encode-then-decode at the given quality (1-100).
/// Shape is preserved; output values lie in [0, 255].
Tensor jpeg_roundtrip(const Tensor& image, int quality);

} // namespace cwatt
