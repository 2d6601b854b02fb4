#pragma once

// Dense 2D arithmetic, valid-mode convolution, Adam and gradient clipping.
// Everything here works in 64-bit reals; callers that want 32-bit parameter
// storage round explicitly (see round_to_f32).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fracfilt {

class Matrix2D {
 public:
  Matrix2D() = default;
  Matrix2D(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  /// Rectangular copy starting at (r0, c0).
  Matrix2D crop(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const;

  Matrix2D& operator+=(const Matrix2D& other);
  Matrix2D& operator-=(const Matrix2D& other);
  Matrix2D& operator*=(double s) noexcept;

  double sum() const noexcept;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix2D&, const Matrix2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix2D operator+(Matrix2D a, const Matrix2D& b);
Matrix2D operator-(Matrix2D a, const Matrix2D& b);
Matrix2D operator*(Matrix2D a, double s);

/// Largest |a - b| over all entries; shapes must agree.
double max_abs_diff(const Matrix2D& a, const Matrix2D& b);

/// `count` kernels, each spanning `depth` input channels of height x width.
struct KernelShape {
  std::size_t count = 0;
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t elements() const noexcept { return count * depth * height * width; }
  friend bool operator==(const KernelShape&, const KernelShape&) = default;
};

class KernelStack {
 public:
  KernelStack() = default;
  explicit KernelStack(KernelShape shape);

  const KernelShape& shape() const noexcept { return shape_; }
  std::size_t count() const noexcept { return shape_.count; }
  std::size_t depth() const noexcept { return shape_.depth; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }

  double& at(std::size_t k, std::size_t d, std::size_t y, std::size_t x) noexcept {
    return data_[index(k, d, y, x)];
  }
  double at(std::size_t k, std::size_t d, std::size_t y, std::size_t x) const noexcept {
    return data_[index(k, d, y, x)];
  }

  /// The height*width plane of kernel k on input channel d.
  std::span<double> plane(std::size_t k, std::size_t d) noexcept {
    return {data_.data() + index(k, d, 0, 0), shape_.height * shape_.width};
  }
  std::span<const double> plane(std::size_t k, std::size_t d) const noexcept {
    return {data_.data() + index(k, d, 0, 0), shape_.height * shape_.width};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const KernelStack&, const KernelStack&) = default;

 private:
  std::size_t index(std::size_t k, std::size_t d, std::size_t y, std::size_t x) const noexcept {
    return ((k * shape_.depth + d) * shape_.height + y) * shape_.width + x;
  }

  KernelShape shape_;
  std::vector<double> data_;
};

/// Valid-mode multi-channel 2D cross-correlation (the CNN convention, no
/// kernel flip, no padding): out_k(y,x) = sum_d sum_(a,b) K(k,d,a,b) in_d(y+a, x+b).
/// All input channels must share dimensions; kernels.depth() must equal the
/// channel count. Throws ShapeError otherwise.
std::vector<Matrix2D> conv2d_valid(std::span<const Matrix2D> input, const KernelStack& kernels);
std::vector<Matrix2D> conv2d_valid(const Matrix2D& input, const KernelStack& kernels);

/// Half-open index range into a flat parameter vector.
struct ParamRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const ParamRange&, const ParamRange&) = default;
};

/// Rescales `grads` in place so that their global L2 norm does not exceed
/// max_norm. Returns the norm measured before clipping. Throws NumericError on
/// non-finite entries and std::invalid_argument when max_norm <= 0.
double clip_global_norm(std::span<double> grads, double max_norm);

double global_norm(std::span<const double> values);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments and per-parameter update counts. Counting per parameter gives
/// parameters that skip a step (inactive branches) the same bias correction
/// they would have under an optimizer of their own.
struct AdamState {
  AdamState() = default;
  AdamState(std::size_t parameter_count, AdamConfig config);

  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::vector<std::uint64_t> updates;
};

/// One Adam update with bias correction. When `active` is non-empty only
/// parameters inside those ranges are touched; everything else keeps its
/// value and moments. Throws ShapeError if sizes disagree.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               std::span<const ParamRange> active = {});

/// Nearest f32 value, returned as double.
inline double round_to_f32(double v) noexcept { return static_cast<double>(static_cast<float>(v)); }

}  // namespace fracfilt
