#include "fracfilt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fracfilt/error.hpp"
#include "fracfilt/parallel.hpp"

namespace fracfilt {

namespace {

double mean_abs_diff(const LumaPlane& cur, Point origin, const Matrix2D& pred) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    for (std::size_t j = 0; j < pred.cols(); ++j) {
      sum += std::abs(static_cast<double>(cur.at(static_cast<std::size_t>(origin.y) + i,
                                                 static_cast<std::size_t>(origin.x) + j)) -
                      pred(i, j));
    }
  }
  return sum / static_cast<double>(pred.size());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

}  // namespace

std::vector<BlockEval> evaluate_pair(const LumaPlane& prev, const LumaPlane& cur, const FilterSet& filters,
                                     const StandardFilterBank& bank, const EvalConfig& cfg) {
  filters.validate();
  if (prev.width() != cur.width() || prev.height() != cur.height()) {
    throw ShapeError("evaluate: frames differ in size");
  }
  if (!std::isfinite(cfg.flag_cost) || cfg.flag_cost < 0.0) throw std::invalid_argument("flag cost must be >= 0");
  const MotionSearch ms(prev, bank, cfg.motion.range);
  const std::vector<MotionResult> results = motion_search_frame(ms, cur, cfg.motion);

  std::vector<BlockEval> out(results.size());
  parallel_for(results.size(), cfg.motion.threads, [&](std::size_t i) {
    const MotionResult& r = results[i];
    BlockEval& e = out[i];
    e.origin = r.origin;
    e.size = r.size;
    if (!r.fractional) {
      e.choice = BlockChoice::Integer;
      e.chosen_sad = r.integer_sad;
      return;
    }
    e.shift = r.shift;
    e.standard_sad = r.fractional_sad;
    const Matrix2D learned = apply_filter(filters[static_cast<std::size_t>(r.shift)], ms.padded_reference(),
                                          ms.to_padded(r.origin + r.anchor_mv), r.size);
    e.learned_sad = mean_abs_diff(cur, r.origin, learned);
    // Differences at the level of FFLT storage precision count as ties.
    if (e.learned_sad + cfg.flag_cost < e.standard_sad - kSadTieTolerance) {
      e.choice = BlockChoice::Learned;
      e.chosen_sad = e.learned_sad;
    } else {
      e.choice = BlockChoice::Standard;
      e.chosen_sad = e.standard_sad;
    }
  });
  return out;
}

EvalReport evaluate_switchable(std::span<const LumaPlane> frames, const FilterSet& filters,
                               const StandardFilterBank& bank, const EvalConfig& cfg) {
  if (frames.size() < 2) throw std::invalid_argument("evaluation needs at least two frames");
  EvalReport rep;
  double frac_pixels = 0.0;
  double all_pixels = 0.0;
  double std_sum = 0.0;
  double switch_sum = 0.0;
  double chosen_sum = 0.0;
  for (std::size_t f = 1; f < frames.size(); ++f) {
    ++rep.frame_pairs;
    for (const BlockEval& e : evaluate_pair(frames[f - 1], frames[f], filters, bank, cfg)) {
      const auto area = static_cast<double>(e.size.area());
      ++rep.blocks;
      all_pixels += area;
      chosen_sum += e.chosen_sad * area;
      if (e.choice == BlockChoice::Integer) continue;
      ++rep.fractional_blocks;
      ++rep.fractional_per_shift[static_cast<std::size_t>(e.shift)];
      frac_pixels += area;
      std_sum += e.standard_sad * area;
      switch_sum += e.chosen_sad * area;
      if (e.choice == BlockChoice::Learned) {
        ++rep.learned_selected;
        ++rep.learned_per_shift[static_cast<std::size_t>(e.shift)];
      }
    }
  }
  rep.degenerate = rep.fractional_blocks == 0;
  if (all_pixels > 0.0) rep.bpp_proxy = chosen_sum / all_pixels;
  if (!rep.degenerate) {
    rep.mean_sad_standard = std_sum / frac_pixels;
    rep.mean_sad_switchable = switch_sum / frac_pixels;
    rep.selection_ratio = static_cast<double>(rep.learned_selected) / static_cast<double>(rep.fractional_blocks);
    if (std_sum > 0.0) rep.saving_percent = 100.0 * (std_sum - switch_sum) / std_sum;
  }
  return rep;
}

std::vector<SelectionMap> selection_map(const LumaPlane& prev, const LumaPlane& cur, const FilterSet& filters,
                                        const StandardFilterBank& bank, const EvalConfig& cfg) {
  const std::vector<BlockEval> evals = evaluate_pair(prev, cur, filters, bank, cfg);
  std::vector<SelectionMap> maps;
  for (const BlockSize& bs : cfg.motion.block_sizes) {
    SelectionMap m;
    m.block = bs;
    m.rows = cur.height() / bs.height;
    m.cols = cur.width() / bs.width;
    m.labels.assign(m.rows * m.cols, 0);
    maps.push_back(std::move(m));
  }
  // Blocks come out grouped by size in the configured order, row-major.
  std::size_t k = 0;
  for (SelectionMap& m : maps) {
    for (int& label : m.labels) label = static_cast<int>(evals.at(k++).choice);
  }
  return maps;
}

void write_selection_map_csv(std::ostream& os, const SelectionMap& map) {
  for (std::size_t r = 0; r < map.rows; ++r) {
    for (std::size_t c = 0; c < map.cols; ++c) os << (c ? "," : "") << map.at(r, c);
    os << '\n';
  }
}

FilterSet bank_equivalent_filterset(const StandardFilterBank& bank) {
  constexpr std::size_t n = 2 * kPatchMargin + 1;
  constexpr std::size_t offset = kPatchMargin - StandardFilterBank::kLeft;
  FilterSet fs;
  fs.prediction_form = true;
  fs.source_hash = "standard-bank";
  for (int m = 0; m < kNumShifts; ++m) {
    const Matrix2D k = bank.kernel_2d(FractionalShift::from_index(m));
    Matrix2D f(n, n);
    for (std::size_t a = 0; a < k.rows(); ++a) {
      for (std::size_t b = 0; b < k.cols(); ++b) f(offset + a, offset + b) = k(a, b);
    }
    fs.filters.push_back(std::move(f));
  }
  return fs;
}

FilterSet windowed_sinc_filterset() {
  constexpr std::size_t n = 2 * kPatchMargin + 1;
  constexpr std::size_t offset = kPatchMargin - 5;  // sinc taps start at -5
  FilterSet fs;
  fs.prediction_form = true;
  fs.source_hash = "windowed-sinc";
  for (int m = 0; m < kNumShifts; ++m) {
    const FractionalShift s = FractionalShift::from_index(m);
    const auto hy = windowed_sinc_taps(s.quarter_y());
    const auto hx = windowed_sinc_taps(s.quarter_x());
    Matrix2D f(n, n);
    for (std::size_t a = 0; a < hy.size(); ++a) {
      for (std::size_t b = 0; b < hx.size(); ++b) f(offset + a, offset + b) = hy[a] * hx[b];
    }
    fs.filters.push_back(std::move(f));
  }
  return fs;
}

std::string filter_file_stem(int m) {
  const FractionalShift s = FractionalShift::from_index(m);
  return "filter_dy" + fixed(s.dy(), 2) + "_dx" + fixed(s.dx(), 2);
}

void write_pgm(std::ostream& os, std::size_t width, std::size_t height, std::span<const unsigned char> pixels) {
  if (pixels.size() != width * height) throw ShapeError("write_pgm: pixel count does not match dimensions");
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void dump_filter_heatmaps(const FilterSet& filters, const std::filesystem::path& dir) {
  filters.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream norm = open_out(dir / "heatmap_norm.csv");
  norm << "file,min,max\n";
  norm.precision(17);
  for (int m = 0; m < kNumShifts; ++m) {
    const Matrix2D& f = filters[static_cast<std::size_t>(m)];
    const std::string stem = filter_file_stem(m);
    {
      std::ofstream csv = open_out(dir / (stem + ".csv"));
      csv.precision(17);
      for (std::size_t r = 0; r < f.rows(); ++r) {
        for (std::size_t c = 0; c < f.cols(); ++c) csv << (c ? "," : "") << f(r, c);
        csv << '\n';
      }
      if (!csv) throw std::runtime_error("write failed: " + (dir / (stem + ".csv")).string());
    }
    const auto [lo, hi] = std::minmax_element(f.data().begin(), f.data().end());
    const double range = *hi - *lo;
    std::vector<unsigned char> px(f.size(), 0);
    for (std::size_t i = 0; i < f.size(); ++i) {
      px[i] = range > 0.0 ? static_cast<unsigned char>(std::lround(255.0 * (f.data()[i] - *lo) / range)) : 0;
    }
    std::ofstream pgm = open_out(dir / (stem + ".pgm"), true);
    write_pgm(pgm, f.cols(), f.rows(), px);
    if (!pgm) throw std::runtime_error("write failed: " + (dir / (stem + ".pgm")).string());
    norm << stem << ".pgm," << *lo << ',' << *hi << '\n';
  }
  if (!norm) throw std::runtime_error("write failed: " + (dir / "heatmap_norm.csv").string());
}

void write_report_csv(std::ostream& os, std::span<const EvalReport> reports) {
  os << "sequence,frame_pairs,blocks,fractional_blocks,learned_selected,mean_sad_standard,mean_sad_switchable,"
        "saving_percent,selection_ratio,bpp_proxy,degenerate\n";
  const auto old = os.precision(10);
  for (const EvalReport& r : reports) {
    os << r.sequence << ',' << r.frame_pairs << ',' << r.blocks << ',' << r.fractional_blocks << ','
       << r.learned_selected << ',' << r.mean_sad_standard << ',' << r.mean_sad_switchable << ',' << r.saving_percent
       << ',' << r.selection_ratio << ',' << r.bpp_proxy << ',' << (r.degenerate ? 1 : 0) << '\n';
  }
  os.precision(old);
}

void write_shift_histogram_csv(std::ostream& os, std::span<const EvalReport> reports) {
  os << "sequence,m,dy,dx,fractional_blocks,learned_selected\n";
  for (const EvalReport& r : reports) {
    for (int m = 0; m < kNumShifts; ++m) {
      const FractionalShift s = FractionalShift::from_index(m);
      os << r.sequence << ',' << m << ',' << FractionalShift::phase_name(s.quarter_y()) << ','
         << FractionalShift::phase_name(s.quarter_x()) << ',' << r.fractional_per_shift[static_cast<std::size_t>(m)]
         << ',' << r.learned_per_shift[static_cast<std::size_t>(m)] << '\n';
    }
  }
}

void write_summary(std::ostream& os, std::span<const EvalReport> reports, double flag_cost) {
  os << "switchable interpolation evaluation (SAD proxy, flag cost " << fixed(flag_cost, 3) << ")\n";
  for (const EvalReport& r : reports) {
    os << "sequence " << r.sequence << ": " << r.frame_pairs << " frame pairs, " << r.blocks << " blocks, "
       << r.fractional_blocks << " fractional\n";
    if (r.degenerate) {
      os << "  no fractional blocks found; nothing to compare\n";
      continue;
    }
    os << "  mean SAD standard:   " << fixed(r.mean_sad_standard, 4) << '\n'
       << "  mean SAD switchable: " << fixed(r.mean_sad_switchable, 4) << '\n'
       << "  saving: " << fixed(r.saving_percent, 2) << "%\n"
       << "  learned selected: " << r.learned_selected << " (ratio " << fixed(r.selection_ratio, 4) << ")\n"
       << "  chosen SAD over all blocks (rate proxy): " << fixed(r.bpp_proxy, 4) << '\n';
  }
}

}  // namespace fracfilt
