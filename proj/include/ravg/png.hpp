// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "ravg/tensor.hpp"

namespace ravg {

// 8-bit RGB preview: values are clipped to [0,1] and sRGB-encoded. The PNG
// stream uses stored (uncompressed) deflate blocks, so no zlib is required.
// HDR data stays in RTF containers; previews are for human inspection only.
void write_png(const std::string& path, const Tensor& image /* [3,H,W] or [H,W] */);

}  // namespace ravg
