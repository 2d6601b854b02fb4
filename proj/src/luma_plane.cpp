#include "fracfilt/luma_plane.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fracfilt {

namespace {

void check_depth(int bit_depth) {
  if (bit_depth < 1 || bit_depth > 16) {
    throw std::invalid_argument("LumaPlane: unsupported bit depth " + std::to_string(bit_depth));
  }
}

}  // namespace

LumaPlane::LumaPlane(std::size_t width, std::size_t height, int bit_depth, std::uint16_t fill)
    : width_(width), height_(height), bit_depth_(bit_depth), samples_(width * height, fill) {
  check_depth(bit_depth);
  if (fill > max_value()) throw std::invalid_argument("LumaPlane: fill value exceeds bit depth");
}

LumaPlane::LumaPlane(std::size_t width, std::size_t height, int bit_depth, std::vector<std::uint16_t> samples)
    : width_(width), height_(height), bit_depth_(bit_depth), samples_(std::move(samples)) {
  check_depth(bit_depth);
  if (samples_.size() != width * height) {
    throw std::invalid_argument("LumaPlane: " + std::to_string(samples_.size()) + " samples for " +
                                std::to_string(width) + "x" + std::to_string(height));
  }
  const auto mx = max_value();
  if (std::any_of(samples_.begin(), samples_.end(), [mx](std::uint16_t s) { return s > mx; })) {
    throw std::invalid_argument("LumaPlane: sample exceeds bit depth");
  }
}

void LumaPlane::set_clipped(std::size_t y, std::size_t x, double value) noexcept {
  const double r = std::clamp(std::round(value), 0.0, static_cast<double>(max_value()));
  at(y, x) = static_cast<std::uint16_t>(r);
}

}  // namespace fracfilt
