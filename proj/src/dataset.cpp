#include "fracfilt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fracfilt/binary_io.hpp"
#include "fracfilt/error.hpp"
#include "fracfilt/parallel.hpp"
#include "fracfilt/random.hpp"

namespace fracfilt {

namespace {

constexpr char kDatasetMagic[4] = {'F', 'F', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;
constexpr int kSincLeft = 5;
constexpr int kSincTaps = 12;

Matrix2D normalized_window(const LumaPlane& plane, Point top_left, std::size_t rows, std::size_t cols) {
  if (top_left.y < 0 || top_left.x < 0 || static_cast<std::size_t>(top_left.y) + rows > plane.height() ||
      static_cast<std::size_t>(top_left.x) + cols > plane.width()) {
    throw BoundsError("window exceeds plane");
  }
  Matrix2D out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = normalize_sample(plane.at(static_cast<std::size_t>(top_left.y) + r, static_cast<std::size_t>(top_left.x) + c));
    }
  }
  return out;
}

Matrix2D normalize_block(const Matrix2D& values) {
  Matrix2D out(values.rows(), values.cols());
  for (std::size_t i = 0; i < values.size(); ++i) out.data()[i] = round_to_f32(values.data()[i] / 255.0);
  return out;
}

// Sum of |cur block - ref block|, stopping once it exceeds `bound`.
std::uint64_t block_sad(const LumaPlane& cur, Point c, const LumaPlane& ref, Point r, BlockSize size,
                        std::uint64_t bound) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < size.height; ++i) {
    const std::size_t cy = static_cast<std::size_t>(c.y) + i;
    const std::size_t ry = static_cast<std::size_t>(r.y) + i;
    for (std::size_t j = 0; j < size.width; ++j) {
      const int a = cur.at(cy, static_cast<std::size_t>(c.x) + j);
      const int b = ref.at(ry, static_cast<std::size_t>(r.x) + j);
      sum += static_cast<std::uint64_t>(a > b ? a - b : b - a);
    }
    if (sum > bound) return sum;
  }
  return sum;
}

double block_sad_real(const LumaPlane& cur, Point c, const Matrix2D& pred) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    for (std::size_t j = 0; j < pred.cols(); ++j) {
      sum += std::abs(static_cast<double>(cur.at(static_cast<std::size_t>(c.y) + i, static_cast<std::size_t>(c.x) + j)) -
                      pred(i, j));
    }
  }
  return sum;
}

std::vector<double> gaussian_taps(double sigma, int radius) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    s += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= s;
  return k;
}

}  // namespace

std::map<CellKey, std::size_t> Dataset::cell_counts() const {
  std::map<CellKey, std::size_t> counts;
  for (const auto& s : samples) ++counts[CellKey{s.label, s.size()}];
  return counts;
}

double normalize_sample(std::uint16_t value) noexcept { return round_to_f32(value / 255.0); }

std::uint16_t denormalize_sample(double value) noexcept {
  return static_cast<std::uint16_t>(std::clamp(std::lround(value * 255.0), 0L, 255L));
}

void check_sample(const TrainingSample& s) {
  if (s.target.empty() || s.patch.rows() != s.target.rows() + 2 * kPatchMargin ||
      s.patch.cols() != s.target.cols() + 2 * kPatchMargin) {
    throw ShapeError("training sample: patch " + std::to_string(s.patch.rows()) + "x" + std::to_string(s.patch.cols()) +
                     " does not extend target " + std::to_string(s.target.rows()) + "x" +
                     std::to_string(s.target.cols()) + " by 6 on each side");
  }
  if (s.label < 0 || s.label >= kNumShifts) throw ShapeError("training sample: label out of range");
}

// ---------------------------------------------------------------------------
// Motion estimation

MotionSearch::MotionSearch(const LumaPlane& reference, const StandardFilterBank& bank, int range)
    : bank_(bank),
      range_(range),
      margin_(range + 1 + static_cast<int>(kPatchMargin) + 1),
      padded_(pad_repetitive(reference, static_cast<std::size_t>(range + 1 + static_cast<int>(kPatchMargin) + 1))) {
  if (range < 0) throw std::invalid_argument("MotionSearch: negative range");
}

Matrix2D MotionSearch::patch(Point anchor, BlockSize size) const {
  const auto m = static_cast<int>(kPatchMargin);
  return normalized_window(padded_, to_padded(anchor) - Point{m, m}, size.height + 2 * kPatchMargin,
                           size.width + 2 * kPatchMargin);
}

MotionResult MotionSearch::search(const LumaPlane& current, Point origin, BlockSize size) const {
  if (current.width() + 2 * static_cast<std::size_t>(margin_) != padded_.width() ||
      current.height() + 2 * static_cast<std::size_t>(margin_) != padded_.height()) {
    throw ShapeError("MotionSearch: current frame size differs from reference");
  }
  MotionResult res;
  res.origin = origin;
  res.size = size;

  // Zero vector first so that exact ties keep it.
  std::uint64_t best = block_sad(current, origin, padded_, to_padded(origin), size, ~std::uint64_t{0});
  Point best_mv{0, 0};
  for (int dy = -range_; dy <= range_; ++dy) {
    for (int dx = -range_; dx <= range_; ++dx) {
      if (best == 0) break;
      const std::uint64_t s = block_sad(current, origin, padded_, to_padded(origin + Point{dy, dx}), size, best);
      if (s < best) {
        best = s;
        best_mv = {dy, dx};
      }
    }
  }
  const double area = static_cast<double>(size.area());
  res.integer_mv = best_mv;
  res.integer_sad = static_cast<double>(best) / area;

  if (best == 0) return res;
  double best_frac = static_cast<double>(best);
  for (const Point step : {Point{0, 0}, Point{0, -1}, Point{-1, 0}, Point{-1, -1}}) {
    const Point anchor = best_mv + step;
    for (int m = 0; m < kNumShifts; ++m) {
      const Matrix2D pred =
          interp_standard(bank_, padded_, to_padded(origin + anchor), size, FractionalShift::from_index(m));
      const double s = block_sad_real(current, origin, pred);
      if (s < best_frac) {
        best_frac = s;
        res.fractional = true;
        res.anchor_mv = anchor;
        res.shift = m;
      }
    }
  }
  if (res.fractional) res.fractional_sad = best_frac / area;
  return res;
}

std::vector<MotionResult> motion_search_frame(const LumaPlane& prev, const LumaPlane& cur,
                                              const StandardFilterBank& bank, const MotionConfig& cfg) {
  if (prev.width() != cur.width() || prev.height() != cur.height()) {
    throw ShapeError("motion search: frames differ in size");
  }
  return motion_search_frame(MotionSearch(prev, bank, cfg.range), cur, cfg);
}

std::vector<MotionResult> motion_search_frame(const MotionSearch& ms, const LumaPlane& cur, const MotionConfig& cfg) {
  std::vector<std::pair<Point, BlockSize>> blocks;
  for (const BlockSize& bs : cfg.block_sizes) {
    if (bs.height == 0 || bs.width == 0) throw std::invalid_argument("motion search: empty block size");
    for (std::size_t y = 0; y + bs.height <= cur.height(); y += bs.height) {
      for (std::size_t x = 0; x + bs.width <= cur.width(); x += bs.width) {
        blocks.push_back({Point{static_cast<int>(y), static_cast<int>(x)}, bs});
      }
    }
  }
  std::vector<MotionResult> results(blocks.size());
  parallel_for(blocks.size(), cfg.threads,
               [&](std::size_t i) { results[i] = ms.search(cur, blocks[i].first, blocks[i].second); });
  return results;
}

std::vector<TrainingSample> generate_me_pairs(const LumaPlane& prev, const LumaPlane& cur,
                                              const StandardFilterBank& bank, const MotionConfig& cfg) {
  if (prev.width() != cur.width() || prev.height() != cur.height()) {
    throw ShapeError("motion search: frames differ in size");
  }
  const MotionSearch ms(prev, bank, cfg.range);
  std::vector<TrainingSample> out;
  for (const MotionResult& r : motion_search_frame(ms, cur, cfg)) {
    if (!r.fractional) continue;
    TrainingSample s;
    s.patch = ms.patch(r.origin + r.anchor_mv, r.size);
    s.target = normalized_window(cur, r.origin, r.size.height, r.size.width);
    s.label = r.shift;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

std::array<double, 12> windowed_sinc_taps(int quarter_phase) {
  if (quarter_phase < 0 || quarter_phase > 3) throw std::invalid_argument("windowed_sinc_taps: bad phase");
  std::array<double, 12> h{};
  if (quarter_phase == 0) {
    h[kSincLeft] = 1.0;
    return h;
  }
  const double d = quarter_phase / 4.0;
  const double half_width = 6.0;
  double sum = 0.0;
  for (int k = 0; k < kSincTaps; ++k) {
    const double t = (k - kSincLeft) - d;
    const double sinc = std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    const double window = 0.5 * (1.0 + std::cos(std::numbers::pi * t / half_width));
    h[static_cast<std::size_t>(k)] = sinc * window;
    sum += h[static_cast<std::size_t>(k)];
  }
  for (double& v : h) v /= sum;
  return h;
}

Matrix2D sinc_shift_block(const LumaPlane& frame, Point origin, BlockSize size, FractionalShift shift) {
  const int right = kSincTaps - kSincLeft - 1;
  if (origin.y - kSincLeft < 0 || origin.x - kSincLeft < 0 ||
      origin.y + static_cast<int>(size.height) - 1 + right >= static_cast<int>(frame.height()) ||
      origin.x + static_cast<int>(size.width) - 1 + right >= static_cast<int>(frame.width())) {
    throw BoundsError("sinc_shift_block: 12-tap support exceeds frame");
  }
  const auto hx = windowed_sinc_taps(shift.quarter_x());
  const auto hy = windowed_sinc_taps(shift.quarter_y());
  const std::size_t rows = size.height + kSincTaps - 1;
  const auto top = static_cast<std::size_t>(origin.y - kSincLeft);
  const auto left = static_cast<std::size_t>(origin.x - kSincLeft);

  // Each pass is written as centre + sum h_k (s_k - centre) so that constant
  // regions pass through without rounding drift.
  Matrix2D tmp(rows, size.width);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < size.width; ++c) {
      const double centre = frame.at(top + r, left + c + kSincLeft);
      double acc = 0.0;
      for (int k = 0; k < kSincTaps; ++k) acc += hx[static_cast<std::size_t>(k)] * (frame.at(top + r, left + c + static_cast<std::size_t>(k)) - centre);
      tmp(r, c) = centre + acc;
    }
  }
  Matrix2D out(size.height, size.width);
  for (std::size_t r = 0; r < size.height; ++r) {
    for (std::size_t c = 0; c < size.width; ++c) {
      const double centre = tmp(r + kSincLeft, c);
      double acc = 0.0;
      for (int k = 0; k < kSincTaps; ++k) acc += hy[static_cast<std::size_t>(k)] * (tmp(r + static_cast<std::size_t>(k), c) - centre);
      out(r, c) = centre + acc;
    }
  }
  return out;
}

std::vector<TrainingSample> generate_synthetic_pairs(const LumaPlane& frame, const SyntheticConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<TrainingSample> out;
  out.reserve(cfg.per_cell * cfg.block_sizes.size() * kNumShifts);
  const auto margin = static_cast<int>(kPatchMargin);
  for (int m = 0; m < kNumShifts; ++m) {
    const FractionalShift shift = FractionalShift::from_index(m);
    for (const BlockSize& bs : cfg.block_sizes) {
      if (frame.height() < bs.height + 2 * kPatchMargin + 1 || frame.width() < bs.width + 2 * kPatchMargin + 1) {
        throw std::invalid_argument("generate_synthetic_pairs: frame too small for " + std::to_string(bs.height) + "x" +
                                    std::to_string(bs.width) + " blocks");
      }
      const std::uint64_t span_y = frame.height() - bs.height - 2 * kPatchMargin + 1;
      const std::uint64_t span_x = frame.width() - bs.width - 2 * kPatchMargin + 1;
      for (std::size_t n = 0; n < cfg.per_cell; ++n) {
        const Point origin{margin + static_cast<int>(rng.below(span_y)), margin + static_cast<int>(rng.below(span_x))};
        TrainingSample s;
        s.patch = normalized_window(frame, origin - Point{margin, margin}, bs.height + 2 * kPatchMargin,
                                    bs.width + 2 * kPatchMargin);
        s.target = normalize_block(sinc_shift_block(frame, origin, bs, shift));
        s.label = m;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

LumaPlane make_texture_frame(std::size_t width, std::size_t height, std::uint64_t seed) {
  if (width == 0 || height == 0) throw std::invalid_argument("make_texture_frame: empty frame");
  Rng rng(seed);
  constexpr int kRadius = 3;
  const auto taps = gaussian_taps(1.0, kRadius);
  Matrix2D noise(height + 2 * kRadius, width + 2 * kRadius);
  for (double& v : noise.data()) v = rng.normal();

  Matrix2D h(noise.rows(), width);
  for (std::size_t y = 0; y < noise.rows(); ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) acc += taps[k] * noise(y, x + k);
      h(y, x) = acc;
    }
  }
  Matrix2D blurred(height, width);
  double mean = 0.0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) acc += taps[k] * h(y + k, x);
      blurred(y, x) = acc;
      mean += acc;
    }
  }
  mean /= static_cast<double>(blurred.size());
  double var = 0.0;
  for (double v : blurred.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(blurred.size()));

  const double fy = rng.uniform(0.5, 2.0) / static_cast<double>(height);
  const double fx = rng.uniform(0.5, 2.0) / static_cast<double>(width);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  LumaPlane out(width, height, 8);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double low = 25.0 * std::sin(2.0 * std::numbers::pi * (fx * x + fy * y) + phase);
      out.set_clipped(y, x, 128.0 + low + 40.0 * (blurred(y, x) - mean) / sd);
    }
  }
  return out;
}

std::vector<LumaPlane> make_synthetic_sequence(std::size_t width, std::size_t height, std::size_t frames,
                                               std::uint64_t seed, std::size_t tile) {
  if (frames == 0 || tile == 0) throw std::invalid_argument("make_synthetic_sequence: need frames and tile > 0");
  std::vector<LumaPlane> seq;
  seq.push_back(make_texture_frame(width, height, seed));
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  constexpr int kMaxInt = 2;
  const int margin = kMaxInt + kSincTaps;
  while (seq.size() < frames) {
    const LumaPlane padded = pad_repetitive(seq.back(), static_cast<std::size_t>(margin));
    LumaPlane next(width, height, 8);
    for (std::size_t ty = 0; ty < height; ty += tile) {
      for (std::size_t tx = 0; tx < width; tx += tile) {
        const int iy = static_cast<int>(rng.below(2 * kMaxInt + 1)) - kMaxInt;
        const int ix = static_cast<int>(rng.below(2 * kMaxInt + 1)) - kMaxInt;
        const auto shift = FractionalShift::from_index(static_cast<int>(rng.below(kNumShifts)));
        const BlockSize bs{std::min(tile, height - ty), std::min(tile, width - tx)};
        const Point origin{static_cast<int>(ty) + iy + margin, static_cast<int>(tx) + ix + margin};
        const Matrix2D moved = sinc_shift_block(padded, origin, bs, shift);
        for (std::size_t r = 0; r < bs.height; ++r) {
          for (std::size_t c = 0; c < bs.width; ++c) next.set_clipped(ty + r, tx + c, moved(r, c));
        }
      }
    }
    seq.push_back(std::move(next));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Balancing and storage

Dataset balance(const Dataset& ds, std::uint64_t seed) {
  std::map<CellKey, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    cells[CellKey{ds.samples[i].label, ds.samples[i].size()}].push_back(i);
  }
  if (cells.empty()) throw std::invalid_argument("balance: dataset has no samples");
  std::size_t target = ds.samples.size();
  for (const auto& [key, idx] : cells) target = std::min(target, idx.size());

  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [key, idx] : cells) {
    rng.shuffle(std::span<std::size_t>(idx));
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target));
  }
  std::sort(keep.begin(), keep.end());
  Dataset out;
  out.samples.reserve(keep.size());
  for (std::size_t i : keep) out.samples.push_back(ds.samples[i]);
  return out;
}

void write_cell_stats_csv(std::ostream& os, const std::map<CellKey, std::size_t>& before,
                          const std::map<CellKey, std::size_t>& after) {
  os << "label,dy,dx,height,width,before,after\n";
  for (const auto& [key, count] : before) {
    const auto shift = FractionalShift::from_index(key.label);
    const auto it = after.find(key);
    os << key.label << ',' << FractionalShift::phase_name(shift.quarter_y()) << ','
       << FractionalShift::phase_name(shift.quarter_x()) << ',' << key.size.height << ',' << key.size.width << ','
       << count << ',' << (it == after.end() ? 0 : it->second) << '\n';
  }
}

void write_dataset(std::ostream& os, const Dataset& ds) {
  os.write(kDatasetMagic, 4);
  io::write_le<std::uint32_t>(os, kDatasetVersion);
  io::write_le<std::uint64_t>(os, ds.samples.size());
  for (const TrainingSample& s : ds.samples) {
    check_sample(s);
    if (s.target.rows() > 0xffff || s.target.cols() > 0xffff) throw ShapeError("write_dataset: block too large");
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(s.target.rows()));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(s.target.cols()));
    io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.label));
    for (double v : s.target.data()) io::write_le<float>(os, static_cast<float>(v));
    for (double v : s.patch.data()) io::write_le<float>(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("write_dataset: stream write failed");
}

Dataset read_dataset(std::istream& is) {
  io::Reader rd(is, "FFDS dataset");
  char magic[4];
  rd.read_bytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kDatasetMagic)) rd.fail("not an FFDS dataset (bad magic)");
  const auto version = rd.read<std::uint32_t>("version");
  if (version != kDatasetVersion) {
    rd.fail("unsupported FFDS version " + std::to_string(version) + " (expected " + std::to_string(kDatasetVersion) + ")");
  }
  const auto count = rd.read<std::uint64_t>("sample count");
  Dataset ds;
  for (std::uint64_t n = 0; n < count; ++n) {
    const auto h = rd.read<std::uint16_t>("block height");
    const auto w = rd.read<std::uint16_t>("block width");
    const auto label = rd.read<std::uint8_t>("label");
    if (h == 0 || w == 0) rd.fail("sample " + std::to_string(n) + " has an empty block");
    if (label >= kNumShifts) rd.fail("sample " + std::to_string(n) + " has label " + std::to_string(label));
    TrainingSample s;
    s.label = label;
    s.target = Matrix2D(h, w);
    for (double& v : s.target.data()) v = rd.read<float>("target");
    s.patch = Matrix2D(h + 2 * kPatchMargin, w + 2 * kPatchMargin);
    for (double& v : s.patch.data()) v = rd.read<float>("patch");
    if (!s.target.all_finite() || !s.patch.all_finite()) rd.fail("sample " + std::to_string(n) + " is not finite");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_dataset(os, ds);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset " + path.string());
  return read_dataset(is);
}

}  // namespace fracfilt
