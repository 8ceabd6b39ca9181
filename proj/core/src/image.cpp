#include "gazekit/image.hpp"

#include "gazekit/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace gazekit {

Rect clip_rect(const Rect& r, int width, int height) {
  const int x0 = std::clamp(r.x, 0, width);
  const int y0 = std::clamp(r.y, 0, height);
  const int x1 = std::clamp(r.x + r.width, 0, width);
  const int y1 = std::clamp(r.y + r.height, 0, height);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

GrayFrame crop(const GrayFrame& frame, const Rect& r) {
  const Rect c = clip_rect(r, frame.width(), frame.height());
  if (c.empty()) throw DataError("crop region does not intersect the frame");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(c.width) * c.height);
  for (int y = 0; y < c.height; ++y) {
    const auto src = frame.row(c.y + y);
    std::copy_n(src.begin() + c.x, c.width, out.begin() + static_cast<std::ptrdiff_t>(y) * c.width);
  }
  return {c.width, c.height, std::move(out), frame.timestamp(), frame.stream()};
}

IntegralImage::IntegralImage(const GrayFrame& frame) {
  build(frame, [](std::uint8_t v) { return static_cast<std::int64_t>(v); });
}

std::int64_t IntegralImage::sum(int x0, int y0, int x1, int y1) const {
  x0 = std::clamp(x0, 0, width_);
  x1 = std::clamp(x1, 0, width_);
  y0 = std::clamp(y0, 0, height_);
  y1 = std::clamp(y1, 0, height_);
  if (x1 <= x0 || y1 <= y0) return 0;
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  return table_[y1 * stride + x1] - table_[y0 * stride + x1] - table_[y1 * stride + x0] +
         table_[y0 * stride + x0];
}

Histogram histogram(const GrayFrame& frame) {
  Histogram h{};
  for (auto v : frame.pixels()) ++h[v];
  return h;
}

double median_intensity(const Histogram& hist) {
  std::uint64_t n = 0;
  for (auto c : hist) n += c;
  if (n == 0) throw DataError("median of empty histogram");
  // 0-based ranks of the middle elements.
  const std::uint64_t lo_rank = (n - 1) / 2, hi_rank = n / 2;
  int lo = -1, hi = -1;
  std::uint64_t seen = 0;
  for (int v = 0; v < 256 && hi < 0; ++v) {
    seen += hist[v];
    if (lo < 0 && seen > lo_rank) lo = v;
    if (seen > hi_rank) hi = v;
  }
  return 0.5 * (lo + hi);
}

GrayFrame shift_frame(const GrayFrame& frame, int dx, int dy, std::uint8_t fill) {
  GrayFrame out(frame.width(), frame.height(), fill, frame.timestamp(), frame.stream());
  for (int y = 0; y < frame.height(); ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= frame.height()) continue;
    for (int x = 0; x < frame.width(); ++x) {
      const int sx = x - dx;
      if (sx < 0 || sx >= frame.width()) continue;
      out.at(x, y) = frame.at(sx, sy);
    }
  }
  return out;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  char c;
  while (is.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(is, ignored);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

GrayFrame read_pgm_stream(std::istream& is, const std::string& source) {
  if (next_token(is) != "P5") throw IoError(source, "not a binary PGM (P5) file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(is));
    h = std::stoi(next_token(is));
    maxval = std::stoi(next_token(is));
  } catch (const std::exception&) {
    throw IoError(source, "malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError(source, "unsupported PGM header");
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
  is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (is.gcount() != static_cast<std::streamsize>(px.size())) throw IoError(source, "truncated PGM data");
  return {w, h, std::move(px)};
}

}  // namespace

std::string encode_pgm(const GrayFrame& frame) {
  std::string out = "P5\n" + std::to_string(frame.width()) + ' ' + std::to_string(frame.height()) + "\n255\n";
  const auto px = frame.pixels();
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

GrayFrame decode_pgm(std::string_view bytes) {
  std::istringstream is{std::string(bytes)};
  return read_pgm_stream(is, "<memory>");
}

void write_pgm(const std::filesystem::path& path, const GrayFrame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  const std::string bytes = encode_pgm(frame);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError(path.string(), "write failed");
}

GrayFrame read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string(), "cannot open for reading");
  return read_pgm_stream(is, path.string());
}

}  // namespace gazekit
