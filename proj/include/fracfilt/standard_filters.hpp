#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <string>

#include "fracfilt/luma_plane.hpp"
#include "fracfilt/numerics.hpp"

namespace fracfilt {

inline constexpr int kNumShifts = 15;

/// A quarter-pel displacement (dy, dx), both in {0, 1/4, 1/2, 3/4}, never
/// (0, 0). Indexed row-major over (dy, dx) with (0, 0) skipped:
///   m = 4 * qy + qx - 1, so m=0 is (0, 1/4), m=3 is (1/4, 0), m=14 is (3/4, 3/4).
class FractionalShift {
 public:
  /// Quarter units; throws std::invalid_argument outside 0..3 or for (0, 0).
  FractionalShift(int quarter_y, int quarter_x);

  static FractionalShift from_index(int m);

  int index() const noexcept { return 4 * qy_ + qx_ - 1; }
  int quarter_y() const noexcept { return qy_; }
  int quarter_x() const noexcept { return qx_; }
  double dy() const noexcept { return qy_ / 4.0; }
  double dx() const noexcept { return qx_ / 4.0; }

  /// "0", "1/4", "1/2" or "3/4".
  static std::string phase_name(int quarter);

  friend bool operator==(const FractionalShift&, const FractionalShift&) = default;

 private:
  int qy_;
  int qx_;
};

/// The 8-tap DCT-IF luma filters for quarter-pel motion compensation. Each
/// phase's taps apply to samples at offsets -3..+4 and sum to 64.
class StandardFilterBank {
 public:
  static constexpr int kTaps = 8;
  static constexpr int kLeft = 3;  // taps before the anchor sample
  static constexpr int kNorm = 64;

  using Taps = std::array<int, kTaps>;

  StandardFilterBank();

  const Taps& taps(int quarter_phase) const { return taps_.at(static_cast<std::size_t>(quarter_phase)); }

  /// Outer product of the vertical and horizontal tap rows divided by 64*64,
  /// anchored so that element (3, 3) multiplies the collocated sample.
  Matrix2D kernel_2d(FractionalShift shift) const;

  /// phase,t0..t7 with phases as quarter units.
  void write_csv(std::ostream& os) const;

 private:
  std::array<Taps, 4> taps_;
};

/// Replicates border samples outward by `margin` on every side. Throws
/// std::invalid_argument on an empty plane.
LumaPlane pad_repetitive(const LumaPlane& plane, std::size_t margin);
Matrix2D pad_repetitive(const Matrix2D& plane, std::size_t margin);

/// Real-valued separable interpolation of the block whose top-left integer
/// sample is `origin`, displaced by `shift`. Horizontal pass first, each pass
/// normalized once by 64, no intermediate rounding. The reference must cover
/// 3 samples above/left and 4 below/right of the block; BoundsError otherwise.
Matrix2D interp_standard(const StandardFilterBank& bank, const Matrix2D& ref, Point origin, BlockSize size,
                         FractionalShift shift);
Matrix2D interp_standard(const StandardFilterBank& bank, const LumaPlane& ref, Point origin, BlockSize size,
                         FractionalShift shift);

}  // namespace fracfilt
