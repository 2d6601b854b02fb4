#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fracfilt {

/// Integer sample position (row, column). May be negative while searching.
struct Point {
  int y = 0;
  int x = 0;

  friend bool operator==(const Point&, const Point&) = default;
  friend Point operator+(Point a, Point b) { return {a.y + b.y, a.x + b.x}; }
  friend Point operator-(Point a, Point b) { return {a.y - b.y, a.x - b.x}; }
};

struct BlockSize {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t area() const noexcept { return height * width; }
  friend auto operator<=>(const BlockSize&, const BlockSize&) = default;
};

/// One frame's luma samples, row-major.
class LumaPlane {
 public:
  LumaPlane() = default;
  LumaPlane(std::size_t width, std::size_t height, int bit_depth = 8, std::uint16_t fill = 0);
  LumaPlane(std::size_t width, std::size_t height, int bit_depth, std::vector<std::uint16_t> samples);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  int bit_depth() const noexcept { return bit_depth_; }
  std::uint16_t max_value() const noexcept { return static_cast<std::uint16_t>((1u << bit_depth_) - 1); }
  bool empty() const noexcept { return samples_.empty(); }

  std::uint16_t& at(std::size_t y, std::size_t x) noexcept { return samples_[y * width_ + x]; }
  std::uint16_t at(std::size_t y, std::size_t x) const noexcept { return samples_[y * width_ + x]; }

  const std::vector<std::uint16_t>& samples() const noexcept { return samples_; }

  /// Sets a sample, clipping to the valid range after rounding half away from zero.
  void set_clipped(std::size_t y, std::size_t x, double value) noexcept;

  friend bool operator==(const LumaPlane&, const LumaPlane&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  int bit_depth_ = 8;
  std::vector<std::uint16_t> samples_;
};

}  // namespace fracfilt
