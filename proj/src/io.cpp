#include "mrst/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include "json.hpp"

#include "mrst/error.hpp"

namespace mrst::io {

using nlohmann::json;

namespace {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

template <class T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(in[offset + b]) << (8 * b);
  return std::bit_cast<T>(bits);
}

json read_header(const std::filesystem::path& payload, const char* expected_format,
                 std::uint32_t expected_version) {
  const auto hdr = header_path(payload);
  std::ifstream f(hdr);
  if (!f) throw IoError("cannot open header " + hdr.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ParseError("header", std::string("invalid JSON in ") + hdr.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("header", "expected a JSON object");
  if (!j.contains("format") || j["format"] != expected_format) {
    throw ParseError("format", std::string("expected '") + expected_format + "'");
  }
  if (!j.contains("version") || !j["version"].is_number_unsigned() ||
      j["version"].get<std::uint32_t>() != expected_version) {
    throw ParseError("version", "unsupported version, expected " + std::to_string(expected_version));
  }
  return j;
}

template <class T>
T header_field(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(key, e.what());
  }
}

void write_header(const std::filesystem::path& payload, const json& j) {
  const auto hdr = header_path(payload);
  std::ofstream f(hdr, std::ios::trunc);
  if (!f) throw IoError("cannot write header " + hdr.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("failed writing " + hdr.string());
}

void expect_size(const std::vector<std::uint8_t>& bytes, std::size_t expected, const char* field) {
  if (bytes.size() != expected) {
    throw ParseError(field, "expected " + std::to_string(expected) + " bytes, got " +
                                std::to_string(bytes.size()));
  }
}

}  // namespace

std::filesystem::path header_path(const std::filesystem::path& payload) {
  return std::filesystem::path(payload.string() + ".hdr");
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

void save_image(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(4 * img.size());
  for (double v : img.values()) put_le(bytes, static_cast<float>(v));
  write_bytes(path, bytes);
  write_header(path, json{{"format", "mrst-image"},
                          {"version", kImageVersion},
                          {"width", img.width()},
                          {"height", img.height()},
                          {"pixel_size", img.pixel_size()},
                          {"units", "modified_hu"},
                          {"dtype", "float32le"}});
}

Image load_image(const std::filesystem::path& path) {
  const json j = read_header(path, "mrst-image", kImageVersion);
  const auto width = header_field<std::size_t>(j, "width");
  const auto height = header_field<std::size_t>(j, "height");
  const auto pixel_size = header_field<double>(j, "pixel_size");
  if (header_field<std::string>(j, "dtype") != "float32le") throw ParseError("dtype", "expected float32le");
  if (width == 0 || height == 0) throw ParseError("width", "image dimensions must be positive");
  const auto bytes = read_bytes(path);
  expect_size(bytes, 4 * width * height, "payload");
  std::vector<double> data(width * height);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_le<float>(bytes, 4 * i);
  return Image(width, height, pixel_size, std::move(data));
}

void save_sinogram(const std::filesystem::path& path, const ct::SinogramSet& sino) {
  sino.validate();
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 * sino.y.size());
  for (double v : sino.y) put_le(bytes, v);
  for (double v : sino.weights) put_le(bytes, v);
  write_bytes(path, bytes);
  write_header(path, json{{"format", "mrst-sinogram"},
                          {"version", kSinogramVersion},
                          {"n_angles", sino.geometry.n_angles},
                          {"n_detectors", sino.geometry.n_detectors},
                          {"detector_spacing", sino.geometry.detector_spacing},
                          {"geometry", "parallel"},
                          {"dtype", "float64le"}});
}

ct::SinogramSet load_sinogram(const std::filesystem::path& path) {
  const json j = read_header(path, "mrst-sinogram", kSinogramVersion);
  ct::SinogramSet s;
  s.geometry.n_angles = header_field<std::size_t>(j, "n_angles");
  s.geometry.n_detectors = header_field<std::size_t>(j, "n_detectors");
  s.geometry.detector_spacing = header_field<double>(j, "detector_spacing");
  if (header_field<std::string>(j, "geometry") != "parallel") throw ParseError("geometry", "expected parallel");
  if (header_field<std::string>(j, "dtype") != "float64le") throw ParseError("dtype", "expected float64le");
  const std::size_t n = s.geometry.rays();
  const auto bytes = read_bytes(path);
  expect_size(bytes, 16 * n, "payload");
  s.y.resize(n);
  s.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.y[i] = get_le<double>(bytes, 8 * i);
  for (std::size_t i = 0; i < n; ++i) s.weights[i] = get_le<double>(bytes, 8 * (n + i));
  s.validate();
  return s;
}

std::vector<std::uint8_t> encode_model(const MrstModel& model) {
  model.validate();
  const std::size_t p = model.patch_size();
  std::vector<std::uint8_t> out{'M', 'R', 'S', 'T'};
  put_le(out, kModelVersion);
  put_le(out, static_cast<std::uint32_t>(model.layers()));
  put_le(out, static_cast<std::uint32_t>(p));
  for (const auto& w : model.transforms)
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c) put_le(out, w(r, c));
  for (double t : model.thresholds) put_le(out, t);
  return out;
}

MrstModel decode_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) {
    throw ParseError("header", "expected at least 16 bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), "MRST", 4) != 0) throw ParseError("magic", "expected 'MRST'");
  if (const auto v = get_le<std::uint32_t>(bytes, 4); v != kModelVersion) {
    throw ParseError("version", "unsupported version " + std::to_string(v) + ", expected " +
                                    std::to_string(kModelVersion));
  }
  const std::size_t layers = get_le<std::uint32_t>(bytes, 8);
  const std::size_t p = get_le<std::uint32_t>(bytes, 12);
  if (layers == 0) throw ParseError("layers", "must be >= 1");
  if (p == 0 || p > 4096) throw ParseError("patch_size", "out of range: " + std::to_string(p));
  expect_size(bytes, 16 + 8 * (layers * p * p + layers), "payload");
  MrstModel m;
  std::size_t off = 16;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix w(p, p);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c, off += 8) w(r, c) = get_le<double>(bytes, off);
    m.transforms.push_back(std::move(w));
  }
  for (std::size_t l = 0; l < layers; ++l, off += 8) m.thresholds.push_back(get_le<double>(bytes, off));
  try {
    m.validate(1e-8);
  } catch (const ConfigError& e) {
    throw ParseError("transforms", e.what());
  }
  return m;
}

void save_model(const std::filesystem::path& path, const MrstModel& model) {
  write_bytes(path, encode_model(model));
}

MrstModel load_model(const std::filesystem::path& path) { return decode_model(read_bytes(path)); }

}  // namespace mrst::io
