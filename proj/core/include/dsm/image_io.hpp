#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsm/tensor.hpp"

namespace dsm {

/// Malformed image data. what() includes the byte offset of the problem.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& format, std::size_t offset, const std::string& message);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// PFM: "Pf\n<w> <h>\n<scale>\n" then float32 rows, bottom row first.
// Negative scale means little-endian. "PF" is the 3-channel variant.

/// Decodes to (1, C, H, W). A "PF" file is rejected unless `accept_color`.
Tensor4 decode_pfm(std::span<const std::uint8_t> bytes, bool accept_color = false);
/// Encodes a (1, 1|3, H, W) map, little-endian, scale -1.
std::vector<std::uint8_t> encode_pfm(const Tensor4& map);

Tensor4 read_pfm(const std::string& path, bool accept_color = false);
void write_pfm(const std::string& path, const Tensor4& map);

// Binary PGM (P5) and PPM (P6), maxval <= 255, samples mapped to [0, 1].

Tensor4 decode_pnm(std::span<const std::uint8_t> bytes);
/// Values are clamped to [0, 1] and rounded to the nearest of 256 levels.
std::vector<std::uint8_t> encode_pnm(const Tensor4& image);

Tensor4 read_pnm(const std::string& path);
void write_pnm(const std::string& path, const Tensor4& image);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace dsm
