#include "cocoedit/pgm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "cocoedit/errors.hpp"

namespace cocoedit {

namespace {

struct RawPgm {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> pixels;
};

class Cursor {
 public:
  explicit Cursor(const std::string& bytes) : s_(bytes) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= s_.size(); }

  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      const unsigned char c = static_cast<unsigned char>(s_[pos_]);
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + (s_[pos_] - '0');
      if (v > 1'000'000'000) throw ParseError(std::string("pgm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("pgm: expected ") + what, start);
    return v;
  }

  unsigned char byte() { return static_cast<unsigned char>(s_[pos_++]); }
  char peek() const { return s_[pos_]; }
  void advance() { ++pos_; }
  std::size_t remaining() const { return s_.size() - pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

RawPgm parse_raw(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw ParseError("pgm: missing P5/P2 magic", 0);
  }
  const bool binary = bytes[1] == '5';
  Cursor cur(bytes);
  cur.advance();
  cur.advance();

  RawPgm raw;
  const std::size_t wpos = cur.pos();
  const long width = cur.read_uint("width");
  const long height = cur.read_uint("height");
  if (width <= 0 || height <= 0) throw ParseError("pgm: zero dimension", wpos);
  const std::size_t mpos = cur.pos();
  const long maxval = cur.read_uint("maxval");
  if (maxval != 255) {
    throw ParseError("pgm: unsupported maxval " + std::to_string(maxval) + " (only 255)", mpos);
  }
  raw.width = static_cast<std::size_t>(width);
  raw.height = static_cast<std::size_t>(height);
  const std::size_t n = raw.width * raw.height;
  raw.pixels.reserve(n);

  if (binary) {
    // Exactly one whitespace byte separates the header from the raster.
    if (cur.at_end() || !std::isspace(static_cast<unsigned char>(cur.peek()))) {
      throw ParseError("pgm: expected whitespace after maxval", cur.pos());
    }
    cur.advance();
    if (cur.remaining() < n) {
      throw ParseError("pgm: raster truncated, need " + std::to_string(n) + " bytes", cur.pos());
    }
    for (std::size_t i = 0; i < n; ++i) raw.pixels.push_back(cur.byte());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t p = cur.pos();
      const long v = cur.read_uint("pixel value");
      if (v > 255) throw ParseError("pgm: pixel value exceeds maxval", p);
      raw.pixels.push_back(static_cast<int>(v));
    }
  }
  return raw;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string header(std::size_t h, std::size_t w) {
  return "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

}  // namespace

Grid2D parse_pgm(const std::string& bytes) {
  RawPgm raw = parse_raw(bytes);
  Grid2D g(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) g[i] = raw.pixels[i] / 255.0;
  return g;
}

EditMask parse_pgm_mask(const std::string& bytes) {
  RawPgm raw = parse_raw(bytes);
  std::vector<std::uint8_t> bits(raw.pixels.size());
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    const int p = raw.pixels[i];
    if (p != 0 && p != 255) {
      throw InvalidMaskError("mask pixel " + std::to_string(i) + " has value " +
                             std::to_string(p) + ", expected 0 or 255");
    }
    bits[i] = p == 255 ? 1 : 0;
  }
  return EditMask(raw.height, raw.width, std::move(bits));
}

Grid2D read_pgm(const std::filesystem::path& path) { return parse_pgm(slurp(path)); }
EditMask read_pgm_mask(const std::filesystem::path& path) { return parse_pgm_mask(slurp(path)); }

std::string encode_pgm(const Grid2D& grid) {
  if (grid.empty()) throw InvalidArgument("write_pgm: empty grid");
  std::string out = header(grid.height(), grid.width());
  out.reserve(out.size() + grid.size());
  for (double v : grid.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("write_pgm: value outside [0,1]");
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(v * 255.0 + 0.5))));
  }
  return out;
}

std::string encode_pgm_mask(const EditMask& mask) {
  std::string out = header(mask.height(), mask.width());
  for (auto b : mask.bits()) out.push_back(static_cast<char>(b ? 255 : 0));
  return out;
}

void write_pgm(const Grid2D& grid, const std::filesystem::path& path) { spit(path, encode_pgm(grid)); }
void write_pgm_mask(const EditMask& mask, const std::filesystem::path& path) {
  spit(path, encode_pgm_mask(mask));
}

}  // namespace cocoedit
