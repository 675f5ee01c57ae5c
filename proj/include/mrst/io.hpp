#pragma once

// On-disk formats (see docs/formats.md). All binary data is little-endian.
//
//  image     <path>      raw float32 pixels, row-major
//            <path>.hdr  JSON header: width, height, pixel_size, units
//  sinogram  <path>      raw float64 y values followed by float64 weights
//            <path>.hdr  JSON header: geometry
//  model     <path>      "MRST", u32 version, u32 L, u32 p, L p x p float64
//                        matrices (row-major), L float64 thresholds

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mrst/ctsim.hpp"
#include "mrst/imaging.hpp"
#include "mrst/mrst.hpp"

namespace mrst::io {

inline constexpr std::uint32_t kImageVersion = 1;
inline constexpr std::uint32_t kSinogramVersion = 1;
inline constexpr std::uint32_t kModelVersion = 1;

std::filesystem::path header_path(const std::filesystem::path& payload);

/// Pixels are stored as float32, so the round trip is exact for images whose
/// values are representable in single precision (every loaded image is).
void save_image(const std::filesystem::path& path, const Image& img);
Image load_image(const std::filesystem::path& path);

void save_sinogram(const std::filesystem::path& path, const ct::SinogramSet& sino);
ct::SinogramSet load_sinogram(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_model(const MrstModel& model);
/// Throws ParseError naming the offending field on a bad magic, version,
/// header or length, and when a transform is not orthogonal to 1e-8.
MrstModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::filesystem::path& path, const MrstModel& model);
MrstModel load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace mrst::io
