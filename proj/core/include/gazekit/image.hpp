#pragma once

#include "gazekit/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <string>
#include <vector>

namespace gazekit {

/// Intersection of r with the frame bounds.
Rect clip_rect(const Rect& r, int width, int height);

/// Copy of the pixels inside r (clipped). Timestamp and stream are kept.
GrayFrame crop(const GrayFrame& frame, const Rect& r);

/// Summed-area table with one row/column of zero padding.
class IntegralImage {
 public:
  explicit IntegralImage(const GrayFrame& frame);
  template <class Pred>
  IntegralImage(const GrayFrame& frame, Pred pred) { build(frame, pred); }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  /// Sum over [x0, x1) x [y0, y1); arguments are clamped to the image.
  std::int64_t sum(int x0, int y0, int x1, int y1) const;

 private:
  template <class Pred>
  void build(const GrayFrame& frame, Pred value);

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int64_t> table_;
};

template <class Pred>
void IntegralImage::build(const GrayFrame& frame, Pred value) {
  width_ = frame.width();
  height_ = frame.height();
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  table_.assign(stride * (height_ + 1), 0);
  for (int y = 0; y < height_; ++y) {
    std::int64_t row = 0;
    const auto src = frame.row(y);
    for (int x = 0; x < width_; ++x) {
      row += value(src[x]);
      table_[(y + 1) * stride + x + 1] = table_[y * stride + x + 1] + row;
    }
  }
}

using Histogram = std::array<std::uint32_t, 256>;
Histogram histogram(const GrayFrame& frame);

/// Median intensity; the mean of the two middle order statistics for even counts.
double median_intensity(const Histogram& hist);

/// Integer shift; out(x, y) = in(x - dx, y - dy), uncovered pixels get `fill`.
GrayFrame shift_frame(const GrayFrame& frame, int dx, int dy, std::uint8_t fill);

/// Binary (P5) PGM.
void write_pgm(const std::filesystem::path& path, const GrayFrame& frame);
GrayFrame read_pgm(const std::filesystem::path& path);
std::string encode_pgm(const GrayFrame& frame);
GrayFrame decode_pgm(std::string_view bytes);

}  // namespace gazekit
