#include "fracfilt/model.hpp"

#include <cmath>
#include <cstring>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "fracfilt/error.hpp"

namespace fracfilt {

namespace {

std::string dims_str(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

void check_branch(std::size_t branch, std::size_t count) {
  if (branch >= count) {
    throw std::out_of_range("branch " + std::to_string(branch) + " out of range (" + std::to_string(count) +
                            " branches)");
  }
}

// Correlation of a large map with a smaller one:
// out(r, c) = sum_(y,x) small(y, x) * big(y + r, x + c); out is (big - small + 1).
void correlate_accumulate(const Matrix2D& big, const Matrix2D& small, Matrix2D& out, double scale = 1.0) {
  const std::size_t out_rows = big.rows() - small.rows() + 1;
  const std::size_t out_cols = big.cols() - small.cols() + 1;
  for (std::size_t y = 0; y < small.rows(); ++y) {
    for (std::size_t x = 0; x < small.cols(); ++x) {
      const double g = small(y, x) * scale;
      if (g == 0.0) continue;
      for (std::size_t r = 0; r < out_rows; ++r) {
        const double* src = big.row(y + r).data() + x;
        double* dst = out.row(r).data();
        for (std::size_t c = 0; c < out_cols; ++c) dst[c] += g * src[c];
      }
    }
  }
}

template <class Samples>
Matrix2D apply_impl(const Matrix2D& filter, const Samples& ref, std::size_t ref_rows, std::size_t ref_cols,
                    Point origin, BlockSize size) {
  if (filter.rows() != filter.cols() || filter.rows() % 2 == 0) {
    throw ShapeError("apply_filter: filter must be square with odd size, got " +
                     dims_str(filter.rows(), filter.cols()));
  }
  const long h = static_cast<long>(filter.rows() / 2);
  const long top = origin.y - h;
  const long left = origin.x - h;
  const long bottom = origin.y + static_cast<long>(size.height) - 1 + h;
  const long right = origin.x + static_cast<long>(size.width) - 1 + h;
  if (top < 0 || left < 0 || bottom >= static_cast<long>(ref_rows) || right >= static_cast<long>(ref_cols)) {
    throw BoundsError("apply_filter: filter support exceeds reference " + dims_str(ref_rows, ref_cols) +
                      " (pad by " + std::to_string(h) + " first)");
  }
  const std::size_t n = filter.rows();
  Matrix2D out(size.height, size.width);
  for (std::size_t i = 0; i < size.height; ++i) {
    for (std::size_t j = 0; j < size.width; ++j) {
      const auto y0 = static_cast<std::size_t>(top + static_cast<long>(i));
      const auto x0 = static_cast<std::size_t>(left + static_cast<long>(j));
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const auto frow = filter.row(r);
        for (std::size_t c = 0; c < n; ++c) acc += frow[c] * ref(y0 + r, x0 + c);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

void fnv1a(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv1a_u32(std::uint64_t& h, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  fnv1a(h, b, 4);
}

}  // namespace

const char* topology_name(Topology t) noexcept {
  switch (t) {
    case Topology::Scratch: return "scratch";
    case Topology::Shared: return "shared";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// LinearConvNet

LinearConvNet::LinearConvNet(Topology topology, NetDims dims) : topology_(topology), dims_(dims) {
  if (dims.branches == 0 || dims.l1_kernels == 0 || dims.l2_kernels == 0 || dims.l1_size % 2 == 0 ||
      dims.l3_size % 2 == 0) {
    throw ShapeError("LinearConvNet: kernel counts must be positive and kernel sizes odd");
  }
  const std::size_t trunks = topology == Topology::Shared ? 1 : dims.branches;
  for (std::size_t t = 0; t < trunks; ++t) {
    k1_.emplace_back(KernelShape{dims.l1_kernels, 1, dims.l1_size, dims.l1_size});
    k2_.emplace_back(KernelShape{dims.l2_kernels, dims.l1_kernels, 1, 1});
  }
  for (std::size_t b = 0; b < dims.branches; ++b) {
    k3_.emplace_back(KernelShape{1, dims.l2_kernels, dims.l3_size, dims.l3_size});
  }
}

std::size_t LinearConvNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& k : k1_) n += k.data().size();
  for (const auto& k : k2_) n += k.data().size();
  for (const auto& k : k3_) n += k.data().size();
  return n;
}

ParamRange LinearConvNet::k1_range(std::size_t trunk) const {
  check_branch(trunk, trunk_count());
  const std::size_t per_trunk = k1_[0].data().size() + k2_[0].data().size();
  const std::size_t begin = trunk * per_trunk;
  return {begin, begin + k1_[0].data().size()};
}

ParamRange LinearConvNet::k2_range(std::size_t trunk) const {
  const ParamRange r1 = k1_range(trunk);
  return {r1.end, r1.end + k2_[0].data().size()};
}

ParamRange LinearConvNet::k3_range(std::size_t branch) const {
  check_branch(branch, branch_count());
  const std::size_t trunk_total = trunk_count() * (k1_[0].data().size() + k2_[0].data().size());
  const std::size_t per_branch = k3_[0].data().size();
  return {trunk_total + branch * per_branch, trunk_total + (branch + 1) * per_branch};
}

std::vector<ParamRange> LinearConvNet::branch_param_ranges(std::size_t branch) const {
  const std::size_t t = trunk_of(branch);
  return {{k1_range(t).begin, k2_range(t).end}, k3_range(branch)};
}

std::vector<double> LinearConvNet::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t t = 0; t < trunk_count(); ++t) {
    out.insert(out.end(), k1_[t].data().begin(), k1_[t].data().end());
    out.insert(out.end(), k2_[t].data().begin(), k2_[t].data().end());
  }
  for (const auto& k : k3_) out.insert(out.end(), k.data().begin(), k.data().end());
  return out;
}

void LinearConvNet::assign(std::span<const double> params) {
  if (params.size() != parameter_count()) {
    throw ShapeError("LinearConvNet::assign: expected " + std::to_string(parameter_count()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  std::size_t pos = 0;
  auto take = [&](KernelStack& k) {
    auto d = k.data();
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(pos),
              params.begin() + static_cast<std::ptrdiff_t>(pos + d.size()), d.begin());
    pos += d.size();
  };
  for (std::size_t t = 0; t < trunk_count(); ++t) {
    take(k1_[t]);
    take(k2_[t]);
  }
  for (auto& k : k3_) take(k);
}

std::vector<Matrix2D> LinearConvNet::trunk_responses(std::size_t trunk) const {
  const KernelStack& w1 = k1_.at(trunk);
  const KernelStack& w2 = k2_.at(trunk);
  const std::size_t s = dims_.l1_size;
  std::vector<Matrix2D> c(dims_.l2_kernels, Matrix2D(s, s));
  for (std::size_t j = 0; j < dims_.l2_kernels; ++j) {
    auto dst = c[j].data();
    for (std::size_t i = 0; i < dims_.l1_kernels; ++i) {
      const double mix = w2.at(j, i, 0, 0);
      if (mix == 0.0) continue;
      const auto src = w1.plane(i, 0);
      for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += mix * src[e];
    }
  }
  return c;
}

std::vector<Matrix2D> LinearConvNet::residual_filters() const {
  const std::size_t n = dims_.support();
  const std::size_t s = dims_.l1_size;
  const std::size_t t3 = dims_.l3_size;
  std::vector<Matrix2D> filters(branch_count(), Matrix2D(n, n));
  std::vector<Matrix2D> c;
  std::size_t cached_trunk = trunk_count();
  for (std::size_t b = 0; b < branch_count(); ++b) {
    if (trunk_of(b) != cached_trunk) {
      cached_trunk = trunk_of(b);
      c = trunk_responses(cached_trunk);
    }
    const KernelStack& w3 = k3_[b];
    Matrix2D& f = filters[b];
    for (std::size_t j = 0; j < dims_.l2_kernels; ++j) {
      for (std::size_t u = 0; u < t3; ++u) {
        for (std::size_t v = 0; v < t3; ++v) {
          const double w = w3.at(0, j, u, v);
          if (w == 0.0) continue;
          for (std::size_t a = 0; a < s; ++a) {
            const double* src = c[j].row(a).data();
            double* dst = f.row(u + a).data() + v;
            for (std::size_t e = 0; e < s; ++e) dst[e] += w * src[e];
          }
        }
      }
    }
  }
  return filters;
}

void LinearConvNet::filter_gradient_to_params(std::span<const Matrix2D> filter_grads, std::span<double> out) const {
  if (filter_grads.size() != branch_count()) {
    throw ShapeError("filter_gradient_to_params: expected " + std::to_string(branch_count()) + " filter gradients");
  }
  if (out.size() != parameter_count()) throw ShapeError("filter_gradient_to_params: output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t n = dims_.support();
  const std::size_t s = dims_.l1_size;
  const std::size_t t3 = dims_.l3_size;

  for (std::size_t t = 0; t < trunk_count(); ++t) {
    bool any = false;
    for (std::size_t b = 0; b < branch_count(); ++b) {
      if (trunk_of(b) == t && !filter_grads[b].empty()) any = true;
    }
    if (!any) continue;

    const std::vector<Matrix2D> c = trunk_responses(t);
    std::vector<Matrix2D> dc(dims_.l2_kernels, Matrix2D(s, s));
    for (std::size_t b = 0; b < branch_count(); ++b) {
      const Matrix2D& g = filter_grads[b];
      if (trunk_of(b) != t || g.empty()) continue;
      if (g.rows() != n || g.cols() != n) throw ShapeError("filter_gradient_to_params: filter gradient must be " + dims_str(n, n));
      const KernelStack& w3 = k3_[b];
      double* d3 = out.data() + k3_range(b).begin;
      for (std::size_t j = 0; j < dims_.l2_kernels; ++j) {
        for (std::size_t u = 0; u < t3; ++u) {
          for (std::size_t v = 0; v < t3; ++v) {
            // M(u + a, v + e) += K3(j, u, v) * C_j(a, e)
            const double w = w3.at(0, j, u, v);
            double acc = 0.0;
            for (std::size_t a = 0; a < s; ++a) {
              const double* grow = g.row(u + a).data() + v;
              const double* crow = c[j].row(a).data();
              double* dcrow = dc[j].row(a).data();
              for (std::size_t e = 0; e < s; ++e) {
                acc += grow[e] * crow[e];
                dcrow[e] += w * grow[e];
              }
            }
            d3[(j * t3 + u) * t3 + v] = acc;
          }
        }
      }
    }
    // C_j = sum_i K2(j, i) K1(i)
    const KernelStack& w1 = k1_[t];
    const KernelStack& w2 = k2_[t];
    double* d1 = out.data() + k1_range(t).begin;
    double* d2 = out.data() + k2_range(t).begin;
    for (std::size_t j = 0; j < dims_.l2_kernels; ++j) {
      const auto dcj = dc[j].data();
      for (std::size_t i = 0; i < dims_.l1_kernels; ++i) {
        const auto k1i = w1.plane(i, 0);
        const double mix = w2.at(j, i, 0, 0);
        double acc = 0.0;
        double* d1i = d1 + i * s * s;
        for (std::size_t e = 0; e < s * s; ++e) {
          acc += dcj[e] * k1i[e];
          d1i[e] += mix * dcj[e];
        }
        d2[j * dims_.l1_kernels + i] = acc;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// SingleLayerNet

SingleLayerNet::SingleLayerNet(std::size_t branches, std::size_t support)
    : support_(support), kernels_(branches, Matrix2D(support, support)) {
  if (branches == 0 || support % 2 == 0) throw ShapeError("SingleLayerNet: need branches > 0 and odd support");
}

std::vector<ParamRange> SingleLayerNet::branch_param_ranges(std::size_t branch) const {
  check_branch(branch, branch_count());
  const std::size_t per = support_ * support_;
  return {{branch * per, (branch + 1) * per}};
}

std::vector<double> SingleLayerNet::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& k : kernels_) out.insert(out.end(), k.data().begin(), k.data().end());
  return out;
}

void SingleLayerNet::assign(std::span<const double> params) {
  if (params.size() != parameter_count()) throw ShapeError("SingleLayerNet::assign: parameter count mismatch");
  std::size_t pos = 0;
  for (auto& k : kernels_) {
    auto d = k.data();
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(pos),
              params.begin() + static_cast<std::ptrdiff_t>(pos + d.size()), d.begin());
    pos += d.size();
  }
}

void SingleLayerNet::filter_gradient_to_params(std::span<const Matrix2D> filter_grads, std::span<double> out) const {
  if (filter_grads.size() != branch_count() || out.size() != parameter_count()) {
    throw ShapeError("SingleLayerNet::filter_gradient_to_params: size mismatch");
  }
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t per = support_ * support_;
  for (std::size_t b = 0; b < branch_count(); ++b) {
    if (filter_grads[b].empty()) continue;
    if (filter_grads[b].size() != per) throw ShapeError("SingleLayerNet: filter gradient shape mismatch");
    std::copy(filter_grads[b].data().begin(), filter_grads[b].data().end(),
              out.begin() + static_cast<std::ptrdiff_t>(b * per));
  }
}

// ---------------------------------------------------------------------------
// Layer-by-layer forward and backward

ForwardTrace forward_trace(const LinearConvNet& net, const Matrix2D& patch, std::size_t branch) {
  check_branch(branch, net.branch_count());
  const std::size_t n = net.dims().support();
  if (patch.rows() < n || patch.cols() < n) {
    throw ShapeError("forward: patch " + dims_str(patch.rows(), patch.cols()) + " smaller than the " +
                     dims_str(n, n) + " support");
  }
  const std::size_t t = net.trunk_of(branch);
  ForwardTrace trace;
  trace.input = patch;
  trace.branch = branch;
  trace.layer1 = conv2d_valid(patch, net.k1(t));
  trace.layer2 = conv2d_valid(trace.layer1, net.k2(t));
  trace.residual = std::move(conv2d_valid(trace.layer2, net.k3(branch)).front());
  return trace;
}

Matrix2D forward(const LinearConvNet& net, const Matrix2D& patch, std::size_t branch) {
  return std::move(forward_trace(net, patch, branch).residual);
}

std::vector<double> backprop_linear(const LinearConvNet& net, const ForwardTrace& trace, const Matrix2D& loss_grad) {
  check_branch(trace.branch, net.branch_count());
  const NetDims& d = net.dims();
  const std::size_t n = d.support();
  const Matrix2D& x = trace.input;
  if (x.rows() < n || x.cols() < n || trace.layer1.size() != d.l1_kernels || trace.layer2.size() != d.l2_kernels) {
    throw ShapeError("backprop_linear: trace does not match the network");
  }
  const std::size_t out_rows = x.rows() - n + 1;
  const std::size_t out_cols = x.cols() - n + 1;
  const std::size_t mid_rows = x.rows() - d.l1_size + 1;
  const std::size_t mid_cols = x.cols() - d.l1_size + 1;
  for (const auto& f : trace.layer1) {
    if (f.rows() != mid_rows || f.cols() != mid_cols) throw ShapeError("backprop_linear: layer-1 map shape mismatch");
  }
  for (const auto& f : trace.layer2) {
    if (f.rows() != mid_rows || f.cols() != mid_cols) throw ShapeError("backprop_linear: layer-2 map shape mismatch");
  }
  if (loss_grad.rows() != out_rows || loss_grad.cols() != out_cols) {
    throw ShapeError("backprop_linear: loss gradient " + dims_str(loss_grad.rows(), loss_grad.cols()) +
                     " but residual is " + dims_str(out_rows, out_cols));
  }

  const std::size_t b = trace.branch;
  const std::size_t t = net.trunk_of(b);
  const std::size_t t3 = d.l3_size;
  const KernelStack& w2 = net.k2(t);
  const KernelStack& w3 = net.k3(b);
  std::vector<double> grads(net.parameter_count(), 0.0);

  // Layer 3: dK3(j,u,v) = sum G(y,x) F2_j(y+u, x+v); dF2_j = full correlation of G with K3_j.
  double* d3 = grads.data() + net.k3_range(b).begin;
  std::vector<Matrix2D> df2(d.l2_kernels, Matrix2D(mid_rows, mid_cols));
  for (std::size_t j = 0; j < d.l2_kernels; ++j) {
    Matrix2D dk(t3, t3);
    correlate_accumulate(trace.layer2[j], loss_grad, dk);
    std::copy(dk.data().begin(), dk.data().end(), d3 + j * t3 * t3);
    for (std::size_t u = 0; u < t3; ++u) {
      for (std::size_t v = 0; v < t3; ++v) {
        const double w = w3.at(0, j, u, v);
        if (w == 0.0) continue;
        for (std::size_t y = 0; y < out_rows; ++y) {
          for (std::size_t xx = 0; xx < out_cols; ++xx) df2[j](y + u, xx + v) += w * loss_grad(y, xx);
        }
      }
    }
  }

  // Layer 2 (1x1 mixing): dK2(j,i) = <dF2_j, F1_i>; dF1_i = sum_j K2(j,i) dF2_j.
  double* d2 = grads.data() + net.k2_range(t).begin;
  std::vector<Matrix2D> df1(d.l1_kernels, Matrix2D(mid_rows, mid_cols));
  for (std::size_t j = 0; j < d.l2_kernels; ++j) {
    const auto g = df2[j].data();
    for (std::size_t i = 0; i < d.l1_kernels; ++i) {
      const auto f = trace.layer1[i].data();
      double acc = 0.0;
      for (std::size_t e = 0; e < g.size(); ++e) acc += g[e] * f[e];
      d2[j * d.l1_kernels + i] = acc;
      const double mix = w2.at(j, i, 0, 0);
      if (mix == 0.0) continue;
      auto dst = df1[i].data();
      for (std::size_t e = 0; e < g.size(); ++e) dst[e] += mix * g[e];
    }
  }

  // Layer 1: dK1_i(a,b) = sum dF1_i(y,x) X(y+a, x+b).
  double* d1 = grads.data() + net.k1_range(t).begin;
  for (std::size_t i = 0; i < d.l1_kernels; ++i) {
    Matrix2D dk(d.l1_size, d.l1_size);
    correlate_accumulate(x, df1[i], dk);
    std::copy(dk.data().begin(), dk.data().end(), d1 + i * d.l1_size * d.l1_size);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Collapse

MasterKernel master_kernel(const LinearConvNet& net, std::size_t branch) {
  check_branch(branch, net.branch_count());
  const NetDims& d = net.dims();
  const std::size_t t = net.trunk_of(branch);
  const KernelStack& w1 = net.k1(t);
  const KernelStack& w2 = net.k2(t);
  const KernelStack& w3 = net.k3(branch);

  MasterKernel mk;
  mk.branch = branch;
  mk.taps = d.l3_size;
  mk.lambda.assign(d.l3_size * d.l3_size, Matrix2D(d.l1_size, d.l1_size));
  for (std::size_t u = 0; u < d.l3_size; ++u) {
    for (std::size_t v = 0; v < d.l3_size; ++v) {
      auto dst = mk.lambda[u * d.l3_size + v].data();
      for (std::size_t j = 0; j < d.l2_kernels; ++j) {
        const double w = w3.at(0, j, u, v);
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < d.l1_kernels; ++i) {
          const double path = w * w2.at(j, i, 0, 0);
          if (path == 0.0) continue;
          const auto src = w1.plane(i, 0);
          for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += path * src[e];
        }
      }
    }
  }
  return mk;
}

Matrix2D collapse(const LinearConvNet& net, std::size_t branch) {
  const MasterKernel mk = master_kernel(net, branch);
  const NetDims& d = net.dims();
  Matrix2D filter(d.support(), d.support());
  for (std::size_t u = 0; u < d.l3_size; ++u) {
    for (std::size_t v = 0; v < d.l3_size; ++v) {
      const Matrix2D& lam = mk.at(u, v);
      for (std::size_t a = 0; a < d.l1_size; ++a) {
        for (std::size_t e = 0; e < d.l1_size; ++e) filter(u + a, v + e) += lam(a, e);
      }
    }
  }
  return filter;
}

Matrix2D filter_gradient(const Matrix2D& patch, const Matrix2D& residual_grad) {
  if (residual_grad.rows() > patch.rows() || residual_grad.cols() > patch.cols()) {
    throw ShapeError("filter_gradient: gradient larger than patch");
  }
  Matrix2D g(patch.rows() - residual_grad.rows() + 1, patch.cols() - residual_grad.cols() + 1);
  correlate_accumulate(patch, residual_grad, g);
  return g;
}

// ---------------------------------------------------------------------------
// Filter sets and application

void FilterSet::validate() const {
  if (filters.size() != static_cast<std::size_t>(kNumShifts)) {
    throw std::invalid_argument("FilterSet: expected 15 filters, got " + std::to_string(filters.size()));
  }
  for (std::size_t m = 0; m < filters.size(); ++m) {
    const Matrix2D& f = filters[m];
    if (f.rows() != f.cols() || f.rows() % 2 == 0 || f.rows() != filters[0].rows()) {
      throw std::invalid_argument("FilterSet: filter " + std::to_string(m) + " has bad shape " +
                                  dims_str(f.rows(), f.cols()));
    }
    if (!f.all_finite()) throw std::invalid_argument("FilterSet: filter " + std::to_string(m) + " is not finite");
  }
}

std::string weights_hash(const LinearConvNet& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const NetDims& d = net.dims();
  fnv1a_u32(h, static_cast<std::uint32_t>(net.topology()));
  for (std::size_t v : {d.branches, d.l1_kernels, d.l2_kernels, d.l1_size, d.l3_size}) {
    fnv1a_u32(h, static_cast<std::uint32_t>(v));
  }
  for (double w : net.flatten()) {
    const float f = static_cast<float>(w);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    fnv1a_u32(h, bits);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FilterSet filterset_from_residuals(std::vector<Matrix2D> residuals, std::string source_hash) {
  FilterSet fs;
  for (Matrix2D& f : residuals) {
    const std::size_t c = f.rows() / 2;
    f(c, c) += 1.0;
  }
  fs.filters = std::move(residuals);
  fs.prediction_form = true;
  fs.source_hash = std::move(source_hash);
  return fs;
}

FilterSet to_prediction_filterset(const LinearConvNet& net) {
  if (net.branch_count() != static_cast<std::size_t>(kNumShifts)) {
    throw ShapeError("to_prediction_filterset: net has " + std::to_string(net.branch_count()) + " branches, need 15");
  }
  return filterset_from_residuals(net.residual_filters(), weights_hash(net));
}

Matrix2D apply_filter(const Matrix2D& filter, const LumaPlane& ref, Point origin, BlockSize size) {
  return apply_impl(
      filter, [&ref](std::size_t y, std::size_t x) { return static_cast<double>(ref.at(y, x)); }, ref.height(),
      ref.width(), origin, size);
}

Matrix2D apply_filter(const Matrix2D& filter, const Matrix2D& ref, Point origin, BlockSize size) {
  return apply_impl(
      filter, [&ref](std::size_t y, std::size_t x) { return ref(y, x); }, ref.rows(), ref.cols(), origin, size);
}

Matrix2D apply_filter(const Matrix2D& filter, const Matrix2D& patch) {
  if (patch.rows() < filter.rows() || patch.cols() < filter.cols()) {
    throw ShapeError("apply_filter: patch " + dims_str(patch.rows(), patch.cols()) + " smaller than filter");
  }
  const auto h = static_cast<int>(filter.rows() / 2);
  return apply_filter(filter, patch, Point{h, h},
                      BlockSize{patch.rows() - filter.rows() + 1, patch.cols() - filter.cols() + 1});
}

}  // namespace fracfilt
