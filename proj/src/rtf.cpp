// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0

#include "ravg/rtf.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "RTF io assumes a little-endian host");

namespace ravg {

using nlohmann::json;

std::vector<double> RawTensor::as_f64() const {
  if (dtype == "f64") return f64;
  std::vector<double> out(f32.size());
  for (std::size_t i = 0; i < f32.size(); ++i) out[i] = f32[i];
  return out;
}

namespace {

void write_record(std::ofstream& os, const RawTensor& r) {
  json header;
  header["dtype"] = r.dtype;
  header["shape"] = r.shape;
  header["name"] = r.name;
  const std::string h = header.dump();
  const std::uint32_t hlen = static_cast<std::uint32_t>(h.size());
  os.write("RTF1", 4);
  os.write(reinterpret_cast<const char*>(&hlen), 4);
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  if (r.dtype == "f32") {
    os.write(reinterpret_cast<const char*>(r.f32.data()),
             static_cast<std::streamsize>(r.f32.size() * sizeof(float)));
  } else {
    os.write(reinterpret_cast<const char*>(r.f64.data()),
             static_cast<std::streamsize>(r.f64.size() * sizeof(double)));
  }
}

void write_all(const std::string& path, const std::vector<RawTensor>& records,
               std::ios::openmode mode) {
  std::ofstream os(path, std::ios::binary | mode);
  if (!os) throw DataError("cannot open for writing: " + path);
  for (const auto& r : records) {
    if (r.dtype != "f32" && r.dtype != "f64")
      throw DataError("rtf: unsupported dtype '" + r.dtype + "'");
    const std::size_t n = r.numel();
    if ((r.dtype == "f32" && r.f32.size() != n) ||
        (r.dtype == "f64" && r.f64.size() != n))
      throw DataError("rtf: record '" + r.name + "' data does not match shape");
    write_record(os, r);
  }
  if (!os) throw DataError("write failed: " + path);
}

}  // namespace

void rtf_write(const std::string& path, const std::vector<RawTensor>& records) {
  write_all(path, records, std::ios::trunc);
}

void rtf_append(const std::string& path, const std::vector<RawTensor>& records) {
  write_all(path, records, std::ios::app);
}

std::vector<RawTensor> rtf_read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  std::vector<RawTensor> out;
  for (;;) {
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() == 0 && is.eof()) break;
    if (is.gcount() != 4 || std::memcmp(magic, "RTF1", 4) != 0)
      throw DataError("rtf: bad magic in " + path);
    std::uint32_t hlen = 0;
    is.read(reinterpret_cast<char*>(&hlen), 4);
    if (is.gcount() != 4 || hlen == 0 || hlen > (1u << 20))
      throw DataError("rtf: bad header length in " + path);
    std::string h(hlen, '\0');
    is.read(h.data(), hlen);
    if (is.gcount() != static_cast<std::streamsize>(hlen))
      throw DataError("rtf: truncated header in " + path);
    json header;
    try {
      header = json::parse(h);
    } catch (const json::exception& e) {
      throw DataError("rtf: invalid header json in " + path + ": " + e.what());
    }
    RawTensor r;
    try {
      r.dtype = header.at("dtype").get<std::string>();
      r.shape = header.at("shape").get<Shape>();
      r.name = header.at("name").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError("rtf: missing header field in " + path + ": " + e.what());
    }
    const std::size_t n = r.numel();
    if (r.dtype == "f32") {
      r.f32.resize(n);
      is.read(reinterpret_cast<char*>(r.f32.data()),
              static_cast<std::streamsize>(n * sizeof(float)));
      if (is.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
        throw DataError("rtf: truncated data in " + path);
    } else if (r.dtype == "f64") {
      r.f64.resize(n);
      is.read(reinterpret_cast<char*>(r.f64.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
      if (is.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
        throw DataError("rtf: truncated data in " + path);
    } else {
      throw DataError("rtf: unsupported dtype '" + r.dtype + "' in " + path);
    }
    out.push_back(std::move(r));
  }
  if (out.empty()) throw DataError("rtf: no records in " + path);
  return out;
}

const RawTensor& rtf_find(const std::vector<RawTensor>& records, const std::string& name) {
  for (const auto& r : records)
    if (r.name == name) return r;
  throw DataError("rtf: record '" + name + "' not found");
}

RawTensor to_raw(const std::string& name, const TensorT<float>& t) {
  RawTensor r;
  r.name = name;
  r.dtype = "f32";
  r.shape = t.shape();
  r.f32 = t.values();
  return r;
}

RawTensor to_raw(const std::string& name, const TensorT<double>& t) {
  RawTensor r;
  r.name = name;
  r.dtype = "f64";
  r.shape = t.shape();
  r.f64 = t.values();
  return r;
}

TensorT<float> raw_to_f32(const RawTensor& r) {
  if (r.dtype != "f32") throw DataError("rtf: record '" + r.name + "' is not f32");
  return TensorT<float>::from(r.shape, r.f32);
}

TensorT<double> raw_to_f64(const RawTensor& r) {
  if (r.dtype != "f64") throw DataError("rtf: record '" + r.name + "' is not f64");
  return TensorT<double>::from(r.shape, r.f64);
}

}  // namespace ravg
