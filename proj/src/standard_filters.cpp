#include "fracfilt/standard_filters.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "fracfilt/error.hpp"

namespace fracfilt {

namespace {

struct MatrixSamples {
  const Matrix2D& m;
  std::size_t rows() const { return m.rows(); }
  std::size_t cols() const { return m.cols(); }
  double operator()(std::size_t y, std::size_t x) const { return m(y, x); }
};

struct LumaSamples {
  const LumaPlane& p;
  std::size_t rows() const { return p.height(); }
  std::size_t cols() const { return p.width(); }
  double operator()(std::size_t y, std::size_t x) const { return p.at(y, x); }
};

template <class Samples>
Matrix2D interp(const StandardFilterBank& bank, Samples ref, Point origin, BlockSize size, FractionalShift shift) {
  constexpr int kLeft = StandardFilterBank::kLeft;
  constexpr int kRight = StandardFilterBank::kTaps - kLeft - 1;
  const long top = static_cast<long>(origin.y) - kLeft;
  const long left = static_cast<long>(origin.x) - kLeft;
  const long bottom = static_cast<long>(origin.y) + static_cast<long>(size.height) - 1 + kRight;
  const long right = static_cast<long>(origin.x) + static_cast<long>(size.width) - 1 + kRight;
  if (top < 0 || left < 0 || bottom >= static_cast<long>(ref.rows()) || right >= static_cast<long>(ref.cols())) {
    throw BoundsError("interp_standard: 8-tap support [" + std::to_string(top) + ".." + std::to_string(bottom) +
                      "]x[" + std::to_string(left) + ".." + std::to_string(right) + "] exceeds reference " +
                      std::to_string(ref.rows()) + "x" + std::to_string(ref.cols()));
  }
  const auto& hx = bank.taps(shift.quarter_x());
  const auto& hy = bank.taps(shift.quarter_y());
  const std::size_t tmp_rows = size.height + StandardFilterBank::kTaps - 1;

  Matrix2D tmp(tmp_rows, size.width);
  for (std::size_t r = 0; r < tmp_rows; ++r) {
    const auto y = static_cast<std::size_t>(top + static_cast<long>(r));
    for (std::size_t c = 0; c < size.width; ++c) {
      const auto x0 = static_cast<std::size_t>(left + static_cast<long>(c));
      double acc = 0.0;
      for (int k = 0; k < StandardFilterBank::kTaps; ++k) acc += hx[k] * ref(y, x0 + k);
      tmp(r, c) = acc / StandardFilterBank::kNorm;
    }
  }
  Matrix2D out(size.height, size.width);
  for (std::size_t r = 0; r < size.height; ++r) {
    for (std::size_t c = 0; c < size.width; ++c) {
      double acc = 0.0;
      for (int k = 0; k < StandardFilterBank::kTaps; ++k) acc += hy[k] * tmp(r + k, c);
      out(r, c) = acc / StandardFilterBank::kNorm;
    }
  }
  return out;
}

template <class Plane, class Get, class Make>
Plane pad(const Plane& in, std::size_t rows, std::size_t cols, std::size_t margin, Get get, Make make) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("pad_repetitive: empty plane");
  Plane out = make(rows + 2 * margin, cols + 2 * margin);
  for (std::size_t y = 0; y < rows + 2 * margin; ++y) {
    const std::size_t sy = y < margin ? 0 : std::min(y - margin, rows - 1);
    for (std::size_t x = 0; x < cols + 2 * margin; ++x) {
      const std::size_t sx = x < margin ? 0 : std::min(x - margin, cols - 1);
      get(out, y, x) = get(in, sy, sx);
    }
  }
  return out;
}

}  // namespace

FractionalShift::FractionalShift(int quarter_y, int quarter_x) : qy_(quarter_y), qx_(quarter_x) {
  if (qy_ < 0 || qy_ > 3 || qx_ < 0 || qx_ > 3 || (qy_ == 0 && qx_ == 0)) {
    throw std::invalid_argument("FractionalShift: invalid quarter phase (" + std::to_string(quarter_y) + "," +
                                std::to_string(quarter_x) + ")");
  }
}

FractionalShift FractionalShift::from_index(int m) {
  if (m < 0 || m >= kNumShifts) throw std::invalid_argument("FractionalShift: index out of range: " + std::to_string(m));
  return {(m + 1) / 4, (m + 1) % 4};
}

std::string FractionalShift::phase_name(int quarter) {
  switch (quarter) {
    case 0: return "0";
    case 1: return "1/4";
    case 2: return "1/2";
    case 3: return "3/4";
    default: throw std::invalid_argument("phase_name: bad quarter " + std::to_string(quarter));
  }
}

StandardFilterBank::StandardFilterBank()
    : taps_{{
          {0, 0, 0, 64, 0, 0, 0, 0},
          {-1, 4, -10, 58, 17, -5, 1, 0},
          {-1, 4, -11, 40, 40, -11, 4, -1},
          {0, 1, -5, 17, 58, -10, 4, -1},
      }} {}

Matrix2D StandardFilterBank::kernel_2d(FractionalShift shift) const {
  const auto& hy = taps(shift.quarter_y());
  const auto& hx = taps(shift.quarter_x());
  Matrix2D k(kTaps, kTaps);
  for (int a = 0; a < kTaps; ++a) {
    for (int b = 0; b < kTaps; ++b) k(a, b) = static_cast<double>(hy[a] * hx[b]) / (kNorm * kNorm);
  }
  return k;
}

void StandardFilterBank::write_csv(std::ostream& os) const {
  os << "phase";
  for (int k = 0; k < kTaps; ++k) os << ",t" << k;
  os << '\n';
  for (int p = 0; p < 4; ++p) {
    os << FractionalShift::phase_name(p);
    for (int t : taps_[static_cast<std::size_t>(p)]) os << ',' << t;
    os << '\n';
  }
}

LumaPlane pad_repetitive(const LumaPlane& plane, std::size_t margin) {
  return pad(
      plane, plane.height(), plane.width(), margin,
      [](auto& p, std::size_t y, std::size_t x) -> decltype(auto) { return p.at(y, x); },
      [&](std::size_t r, std::size_t c) { return LumaPlane(c, r, plane.bit_depth()); });
}

Matrix2D pad_repetitive(const Matrix2D& plane, std::size_t margin) {
  return pad(
      plane, plane.rows(), plane.cols(), margin,
      [](auto& p, std::size_t y, std::size_t x) -> decltype(auto) { return p(y, x); },
      [](std::size_t r, std::size_t c) { return Matrix2D(r, c); });
}

Matrix2D interp_standard(const StandardFilterBank& bank, const Matrix2D& ref, Point origin, BlockSize size,
                         FractionalShift shift) {
  return interp(bank, MatrixSamples{ref}, origin, size, shift);
}

Matrix2D interp_standard(const StandardFilterBank& bank, const LumaPlane& ref, Point origin, BlockSize size,
                         FractionalShift shift) {
  return interp(bank, LumaSamples{ref}, origin, size, shift);
}

}  // namespace fracfilt
