#include "fracfilt/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fracfilt/error.hpp"

namespace fracfilt {

namespace {

std::string dims(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

void require_same_shape(const Matrix2D& a, const Matrix2D& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a.rows(), a.cols()) + " vs " +
                     dims(b.rows(), b.cols()));
  }
}

// Post-clip norms land within a few ulps of max_norm; this slack keeps a second
// clip from rescaling again.
constexpr double kClipSlack = 1e-12;

}  // namespace

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix2D: " + std::to_string(data_.size()) + " values for " + dims(rows, cols));
  }
}

Matrix2D Matrix2D::crop(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
  if (r0 + rows > rows_ || c0 + cols > cols_) {
    throw BoundsError("Matrix2D::crop: " + dims(rows, cols) + " at (" + std::to_string(r0) + "," +
                      std::to_string(c0) + ") exceeds " + dims(rows_, cols_));
  }
  Matrix2D out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = (*this)(r0 + r, c0 + c);
  }
  return out;
}

Matrix2D& Matrix2D::operator+=(const Matrix2D& other) {
  require_same_shape(*this, other, "Matrix2D::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix2D& Matrix2D::operator-=(const Matrix2D& other) {
  require_same_shape(*this, other, "Matrix2D::operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix2D& Matrix2D::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

double Matrix2D::sum() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

bool Matrix2D::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix2D operator+(Matrix2D a, const Matrix2D& b) { return a += b; }
Matrix2D operator-(Matrix2D a, const Matrix2D& b) { return a -= b; }
Matrix2D operator*(Matrix2D a, double s) { return a *= s; }

double max_abs_diff(const Matrix2D& a, const Matrix2D& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

KernelStack::KernelStack(KernelShape shape) : shape_(shape), data_(shape.elements(), 0.0) {}

std::vector<Matrix2D> conv2d_valid(std::span<const Matrix2D> input, const KernelStack& kernels) {
  if (input.empty()) throw ShapeError("conv2d_valid: no input channels");
  if (kernels.depth() != input.size()) {
    throw ShapeError("conv2d_valid: kernel depth " + std::to_string(kernels.depth()) + " but " +
                     std::to_string(input.size()) + " input channels");
  }
  const std::size_t in_rows = input[0].rows();
  const std::size_t in_cols = input[0].cols();
  for (const Matrix2D& ch : input) {
    if (ch.rows() != in_rows || ch.cols() != in_cols) {
      throw ShapeError("conv2d_valid: input channels differ in shape");
    }
  }
  const std::size_t kh = kernels.height();
  const std::size_t kw = kernels.width();
  if (kh == 0 || kw == 0 || in_rows < kh || in_cols < kw) {
    throw ShapeError("conv2d_valid: input " + dims(in_rows, in_cols) + " smaller than kernel " +
                     dims(kh, kw));
  }
  const std::size_t out_rows = in_rows - kh + 1;
  const std::size_t out_cols = in_cols - kw + 1;

  std::vector<Matrix2D> out(kernels.count(), Matrix2D(out_rows, out_cols));
  for (std::size_t k = 0; k < kernels.count(); ++k) {
    Matrix2D& o = out[k];
    for (std::size_t d = 0; d < kernels.depth(); ++d) {
      const Matrix2D& in = input[d];
      const auto w = kernels.plane(k, d);
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          const double coeff = w[a * kw + b];
          if (coeff == 0.0) continue;
          for (std::size_t y = 0; y < out_rows; ++y) {
            const double* src = in.row(y + a).data() + b;
            double* dst = o.row(y).data();
            for (std::size_t x = 0; x < out_cols; ++x) dst[x] += coeff * src[x];
          }
        }
      }
    }
  }
  return out;
}

std::vector<Matrix2D> conv2d_valid(const Matrix2D& input, const KernelStack& kernels) {
  return conv2d_valid(std::span<const Matrix2D>(&input, 1), kernels);
}

double global_norm(std::span<const double> values) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  return std::sqrt(sq);
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericError("clip_global_norm: non-finite gradient");
  }
  const double norm = global_norm(grads);
  if (norm > max_norm * (1.0 + kClipSlack)) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

AdamState::AdamState(std::size_t parameter_count, AdamConfig cfg)
    : config(cfg),
      first_moment(parameter_count, 0.0),
      second_moment(parameter_count, 0.0),
      updates(parameter_count, 0) {}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               std::span<const ParamRange> active) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n ||
      state.updates.size() != n) {
    throw ShapeError("adam_step: parameter/gradient/state sizes disagree (" + std::to_string(n) + " params, " +
                     std::to_string(grads.size()) + " grads, " + std::to_string(state.first_moment.size()) +
                     " moments)");
  }
  const AdamConfig& c = state.config;
  auto update = [&](std::size_t begin, std::size_t end) {
    if (end > n || begin > end) throw ShapeError("adam_step: active range out of bounds");
    for (std::size_t i = begin; i < end; ++i) {
      const double g = grads[i];
      double& m = state.first_moment[i];
      double& v = state.second_moment[i];
      m = c.beta1 * m + (1.0 - c.beta1) * g;
      v = c.beta2 * v + (1.0 - c.beta2) * g * g;
      const auto t = static_cast<double>(++state.updates[i]);
      const double m_hat = m / (1.0 - std::pow(c.beta1, t));
      const double v_hat = v / (1.0 - std::pow(c.beta2, t));
      params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  };
  if (active.empty()) {
    update(0, n);
  } else {
    for (const ParamRange& r : active) update(r.begin, r.end);
  }
  ++state.step;
}

}  // namespace fracfilt
