#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fracfilt/luma_plane.hpp"
#include "fracfilt/numerics.hpp"
#include "fracfilt/standard_filters.hpp"

namespace fracfilt {

/// Scratch: every branch owns its layer-1/layer-2 kernels (independent nets).
/// Shared: one trunk (layers 1 and 2) feeds all branches.
enum class Topology : std::uint8_t { Scratch = 0, Shared = 1 };

const char* topology_name(Topology t) noexcept;

struct NetDims {
  std::size_t branches = kNumShifts;
  std::size_t l1_kernels = 64;
  std::size_t l2_kernels = 32;
  std::size_t l1_size = 9;
  std::size_t l3_size = 5;

  /// Input window feeding one output sample (13 for 9x9 then 5x5).
  std::size_t support() const noexcept { return l1_size + l3_size - 1; }
  std::size_t margin() const noexcept { return support() / 2; }

  friend bool operator==(const NetDims&, const NetDims&) = default;
};

/// Bias-free, activation-free three-layer convolutional net:
/// l1_kernels of l1_size^2, then l2_kernels 1x1 mixing, then per branch a
/// single l3_size^2 kernel over the l2 maps whose outputs are summed.
/// Parameters flatten as [K1(t), K2(t) for each trunk t] then [K3(b) for each branch b].
class LinearConvNet {
 public:
  explicit LinearConvNet(Topology topology = Topology::Shared, NetDims dims = {});

  Topology topology() const noexcept { return topology_; }
  const NetDims& dims() const noexcept { return dims_; }
  std::size_t branch_count() const noexcept { return dims_.branches; }
  std::size_t trunk_count() const noexcept { return k1_.size(); }
  std::size_t trunk_of(std::size_t branch) const noexcept { return topology_ == Topology::Shared ? 0 : branch; }

  KernelStack& k1(std::size_t trunk) { return k1_.at(trunk); }
  const KernelStack& k1(std::size_t trunk) const { return k1_.at(trunk); }
  KernelStack& k2(std::size_t trunk) { return k2_.at(trunk); }
  const KernelStack& k2(std::size_t trunk) const { return k2_.at(trunk); }
  KernelStack& k3(std::size_t branch) { return k3_.at(branch); }
  const KernelStack& k3(std::size_t branch) const { return k3_.at(branch); }

  std::size_t parameter_count() const noexcept;
  ParamRange k1_range(std::size_t trunk) const;
  ParamRange k2_range(std::size_t trunk) const;
  ParamRange k3_range(std::size_t branch) const;
  /// Every parameter that influences `branch`: its trunk and its K3.
  std::vector<ParamRange> branch_param_ranges(std::size_t branch) const;

  std::vector<double> flatten() const;
  void assign(std::span<const double> params);

  /// Residual filters for all branches (collapse of each branch).
  std::vector<Matrix2D> residual_filters() const;

  /// Chain rule from d(loss)/d(residual filter of branch b) to every
  /// parameter, written into `out` (size parameter_count()). Empty matrices
  /// in `filter_grads` mark branches without gradient.
  void filter_gradient_to_params(std::span<const Matrix2D> filter_grads, std::span<double> out) const;

  friend bool operator==(const LinearConvNet&, const LinearConvNet&) = default;

 private:
  /// C_t(j) = sum_i K2_t(j, i) K1_t(i): the l1_size^2 response of l2 channel j.
  std::vector<Matrix2D> trunk_responses(std::size_t trunk) const;

  Topology topology_;
  NetDims dims_;
  std::vector<KernelStack> k1_;
  std::vector<KernelStack> k2_;
  std::vector<KernelStack> k3_;
};

/// One 13x13 residual filter per branch, trained directly (the one-layer
/// baseline). Same parameter interface as LinearConvNet.
class SingleLayerNet {
 public:
  explicit SingleLayerNet(std::size_t branches = kNumShifts, std::size_t support = 13);

  std::size_t branch_count() const noexcept { return kernels_.size(); }
  std::size_t support() const noexcept { return support_; }
  Matrix2D& kernel(std::size_t branch) { return kernels_.at(branch); }
  const Matrix2D& kernel(std::size_t branch) const { return kernels_.at(branch); }

  std::size_t parameter_count() const noexcept { return kernels_.size() * support_ * support_; }
  std::vector<ParamRange> branch_param_ranges(std::size_t branch) const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> params);
  std::vector<Matrix2D> residual_filters() const { return kernels_; }
  void filter_gradient_to_params(std::span<const Matrix2D> filter_grads, std::span<double> out) const;

  friend bool operator==(const SingleLayerNet&, const SingleLayerNet&) = default;

 private:
  std::size_t support_;
  std::vector<Matrix2D> kernels_;
};

/// Intermediate maps of a forward pass, kept for backprop_linear.
struct ForwardTrace {
  Matrix2D input;
  std::vector<Matrix2D> layer1;
  std::vector<Matrix2D> layer2;
  Matrix2D residual;
  std::size_t branch = 0;
};

/// Residual R for `branch` on a (H+12)x(W+12) patch, computed layer by layer.
/// Throws ShapeError for patches smaller than the support.
Matrix2D forward(const LinearConvNet& net, const Matrix2D& patch, std::size_t branch);
ForwardTrace forward_trace(const LinearConvNet& net, const Matrix2D& patch, std::size_t branch);

/// Exact parameter gradients of <loss_grad, R> through the recorded trace,
/// as a flat vector in LinearConvNet parameter order (zeros outside the
/// branch's parameters). Throws ShapeError if trace, net and loss_grad disagree.
std::vector<double> backprop_linear(const LinearConvNet& net, const ForwardTrace& trace, const Matrix2D& loss_grad);

/// The l3_size^2 matrices Lambda(u, v) of size l1_size^2: the contribution of
/// input samples to an output sample through layer-3 tap (u, v).
struct MasterKernel {
  std::size_t branch = 0;
  std::size_t taps = 0;  // l3_size
  std::vector<Matrix2D> lambda;  // row-major over (u, v)

  const Matrix2D& at(std::size_t u, std::size_t v) const { return lambda.at(u * taps + v); }
};

MasterKernel master_kernel(const LinearConvNet& net, std::size_t branch);

/// Residual filter of `branch`: every Lambda(u, v) placed at offset (u, v) in
/// a zero support x support array, summed.
Matrix2D collapse(const LinearConvNet& net, std::size_t branch);

/// d(loss)/d(filter) for loss = <residual_grad, filter applied to patch>:
/// G(r, c) = sum_(y,x) residual_grad(y, x) * patch(y + r, x + c).
Matrix2D filter_gradient(const Matrix2D& patch, const Matrix2D& residual_grad);

/// Fifteen prediction filters (centre already incremented by one) plus
/// provenance. Applying filter m to a window gives the branch-m prediction.
struct FilterSet {
  static constexpr std::uint32_t kEnumerationVersion = 1;
  static constexpr const char* kEnumerationId = "dydx-rowmajor-quarter";

  std::vector<Matrix2D> filters;
  bool prediction_form = true;
  std::string source_hash;
  std::uint32_t enumeration_version = kEnumerationVersion;

  std::size_t size() const noexcept { return filters.size(); }
  const Matrix2D& operator[](std::size_t m) const { return filters.at(m); }

  /// Throws std::invalid_argument unless there are 15 finite square odd filters.
  void validate() const;
};

/// 64-bit FNV-1a over the topology, shapes and f32 weights, as 16 hex digits.
std::string weights_hash(const LinearConvNet& net);

/// Collapses every branch and adds 1 at the centre.
FilterSet to_prediction_filterset(const LinearConvNet& net);

/// Prediction filters from residual filters (centre +1).
FilterSet filterset_from_residuals(std::vector<Matrix2D> residuals, std::string source_hash);

/// out(i, j) = sum_(r,c) filter(r, c) * ref(origin.y + i - h + r, origin.x + j - h + c)
/// with h = filter.rows() / 2, i.e. the window centred on the collocated
/// sample. Throws BoundsError if any window leaves the plane.
Matrix2D apply_filter(const Matrix2D& filter, const LumaPlane& ref, Point origin, BlockSize size);
Matrix2D apply_filter(const Matrix2D& filter, const Matrix2D& ref, Point origin, BlockSize size);

/// Valid-mode application over a whole patch: output is patch minus the
/// filter support plus one on each axis.
Matrix2D apply_filter(const Matrix2D& filter, const Matrix2D& patch);

}  // namespace fracfilt
