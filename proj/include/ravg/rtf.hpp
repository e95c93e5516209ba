// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// RTF tensor container. One record is:
//   magic "RTF1" | u32 little-endian header length | UTF-8 JSON header
//   {"dtype":"f32"|"f64","shape":[...],"name":string} | raw little-endian
//   values in row-major order.
// A file is one or more records concatenated. All persistence (checkpoints,
// datasets, images) uses this container.
#pragma once

#include <string>
#include <vector>

#include "ravg/common.hpp"
#include "ravg/tensor.hpp"

namespace ravg {

struct RawTensor {
  std::string name;
  std::string dtype;  // "f32" or "f64"
  Shape shape;
  std::vector<float> f32;
  std::vector<double> f64;

  std::size_t numel() const { return shape_numel(shape); }
  std::vector<double> as_f64() const;
};

void rtf_write(const std::string& path, const std::vector<RawTensor>& records);
void rtf_append(const std::string& path, const std::vector<RawTensor>& records);
std::vector<RawTensor> rtf_read(const std::string& path);

// Returns the record with the given name; throws DataError when absent.
const RawTensor& rtf_find(const std::vector<RawTensor>& records, const std::string& name);

RawTensor to_raw(const std::string& name, const TensorT<float>& t);
RawTensor to_raw(const std::string& name, const TensorT<double>& t);
TensorT<float> raw_to_f32(const RawTensor& r);
TensorT<double> raw_to_f64(const RawTensor& r);

}  // namespace ravg
