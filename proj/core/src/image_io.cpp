#include "dsm/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dsm {

FormatError::FormatError(const std::string& format, std::size_t offset, const std::string& message)
    : std::runtime_error(format + " at byte " + std::to_string(offset) + ": " + message),
      offset_(offset) {}

namespace {

constexpr std::size_t kMaxExtent = 1 << 15;

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

/// Header tokenizer shared by both formats.
class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> b, const char* format, bool comments)
      : bytes_(b), format_(format), comments_(comments) {}

  std::size_t pos() const { return pos_; }

  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (comments_ && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_]) && pos_ - start < 64) ++pos_;
    if (pos_ == start) fail(start, std::string("missing ") + what);
    return std::string(bytes_.begin() + static_cast<std::ptrdiff_t>(start),
                       bytes_.begin() + static_cast<std::ptrdiff_t>(pos_));
  }

  std::size_t extent(const char* what) {
    const std::size_t at = (skip_space(), pos_);
    const std::string t = token(what);
    std::size_t v = 0;
    for (char ch : t) {
      if (ch < '0' || ch > '9') fail(at, std::string("non-numeric ") + what + " '" + t + "'");
      v = v * 10 + static_cast<std::size_t>(ch - '0');
      if (v > kMaxExtent) fail(at, std::string(what) + " too large");
    }
    if (v == 0) fail(at, std::string(what) + " must be positive");
    return v;
  }

  /// Exactly one whitespace byte separates the header from the payload.
  void end_of_header() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) fail(pos_, "expected whitespace before data");
    ++pos_;
  }

  [[noreturn]] void fail(std::size_t at, const std::string& msg) const { throw FormatError(format_, at, msg); }

 private:
  std::span<const std::uint8_t> bytes_;
  const char* format_;
  bool comments_;
  std::size_t pos_ = 0;
};

void require_single_image(const Tensor4& t, const char* what) {
  if (t.n() != 1 || (t.c() != 1 && t.c() != 3) || t.h() == 0 || t.w() == 0)
    throw ShapeError(std::string(what) + ": expected (1, 1|3, H, W), got " + to_string(t.shape()));
}

}  // namespace

Tensor4 decode_pfm(std::span<const std::uint8_t> bytes, bool accept_color) {
  HeaderReader r(bytes, "PFM", false);
  const std::string magic = r.token("magic");
  std::size_t C = 0;
  if (magic == "Pf") C = 1;
  else if (magic == "PF") {
    if (!accept_color) r.fail(0, "3-channel 'PF' file where a single-channel 'Pf' map was expected");
    C = 3;
  } else {
    r.fail(0, "bad magic '" + magic.substr(0, 8) + "'");
  }
  const std::size_t W = r.extent("width");
  const std::size_t H = r.extent("height");
  const std::size_t scale_at = (r.skip_space(), r.pos());
  const std::string scale_text = r.token("scale");
  double scale = 0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_text, &used);
    if (used != scale_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    r.fail(scale_at, "bad scale '" + scale_text + "'");
  }
  if (!(scale != 0) || !std::isfinite(scale)) r.fail(scale_at, "scale must be finite and non-zero");
  r.end_of_header();
  const bool little = scale < 0;
  const std::size_t need = W * H * C * 4;
  const std::size_t have = bytes.size() - r.pos();
  if (have < need)
    r.fail(bytes.size(), "truncated payload: " + std::to_string(have) + " of " + std::to_string(need) + " bytes");

  Tensor4 out(1, C, H, W);
  const std::uint8_t* p = bytes.data() + r.pos();
  for (std::size_t row = 0; row < H; ++row) {
    const std::size_t y = H - 1 - row;
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) {
        std::uint8_t b[4];
        std::memcpy(b, p, 4);
        p += 4;
        if (little != (std::endian::native == std::endian::little)) {
          std::swap(b[0], b[3]);
          std::swap(b[1], b[2]);
        }
        float f;
        std::memcpy(&f, b, 4);
        out(0, c, y, x) = f;
      }
  }
  return out;
}

std::vector<std::uint8_t> encode_pfm(const Tensor4& map) {
  require_single_image(map, "encode_pfm");
  if (!map.all_finite()) throw std::domain_error("encode_pfm: non-finite value");
  const std::string header = std::string(map.c() == 1 ? "Pf" : "PF") + "\n" + std::to_string(map.w()) + " " +
                             std::to_string(map.h()) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + map.size() * 4);
  for (std::size_t row = 0; row < map.h(); ++row) {
    const std::size_t y = map.h() - 1 - row;
    for (std::size_t x = 0; x < map.w(); ++x)
      for (std::size_t c = 0; c < map.c(); ++c) {
        const auto f = static_cast<float>(map(0, c, y, x));
        std::uint8_t b[4];
        std::memcpy(b, &f, 4);
        if constexpr (std::endian::native == std::endian::big) {
          std::swap(b[0], b[3]);
          std::swap(b[1], b[2]);
        }
        out.insert(out.end(), b, b + 4);
      }
  }
  return out;
}

Tensor4 decode_pnm(std::span<const std::uint8_t> bytes) {
  HeaderReader r(bytes, "PNM", true);
  const std::string magic = r.token("magic");
  std::size_t C = 0;
  if (magic == "P5") C = 1;
  else if (magic == "P6") C = 3;
  else r.fail(0, "unsupported magic '" + magic.substr(0, 8) + "' (expected P5 or P6)");
  const std::size_t W = r.extent("width");
  const std::size_t H = r.extent("height");
  const std::size_t max_at = (r.skip_space(), r.pos());
  const std::size_t maxval = r.extent("maxval");
  if (maxval > 255) r.fail(max_at, "maxval " + std::to_string(maxval) + " exceeds 255");
  r.end_of_header();
  const std::size_t need = W * H * C;
  const std::size_t have = bytes.size() - r.pos();
  if (have < need)
    r.fail(bytes.size(), "truncated payload: " + std::to_string(have) + " of " + std::to_string(need) + " bytes");
  Tensor4 out(1, C, H, W);
  const std::uint8_t* p = bytes.data() + r.pos();
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t v = *p++;
        if (v > maxval) r.fail(static_cast<std::size_t>(p - bytes.data() - 1), "sample exceeds maxval");
        out(0, c, y, x) = static_cast<Real>(v) / static_cast<Real>(maxval);
      }
  return out;
}

std::vector<std::uint8_t> encode_pnm(const Tensor4& image) {
  require_single_image(image, "encode_pnm");
  const std::string header = std::string(image.c() == 1 ? "P5" : "P6") + "\n" + std::to_string(image.w()) +
                             " " + std::to_string(image.h()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + image.size());
  for (std::size_t y = 0; y < image.h(); ++y)
    for (std::size_t x = 0; x < image.w(); ++x)
      for (std::size_t c = 0; c < image.c(); ++c) {
        const Real v = image(0, c, y, x);
        const Real clamped = std::isfinite(v) ? std::clamp<Real>(v, 0, 1) : 0;
        out.push_back(static_cast<std::uint8_t>(std::lround(clamped * 255)));
      }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

Tensor4 read_pfm(const std::string& path, bool accept_color) {
  try {
    return decode_pfm(read_file_bytes(path), accept_color);
  } catch (const FormatError& e) {
    throw FormatError("PFM " + path, e.offset(), std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
  }
}

void write_pfm(const std::string& path, const Tensor4& map) { write_file_bytes(path, encode_pfm(map)); }

Tensor4 read_pnm(const std::string& path) {
  try {
    return decode_pnm(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError("PNM " + path, e.offset(), std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
  }
}

void write_pnm(const std::string& path, const Tensor4& image) { write_file_bytes(path, encode_pnm(image)); }

}  // namespace dsm
