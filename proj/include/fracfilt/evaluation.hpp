#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fracfilt/dataset.hpp"
#include "fracfilt/luma_plane.hpp"
#include "fracfilt/model.hpp"
#include "fracfilt/standard_filters.hpp"

namespace fracfilt {

struct EvalConfig {
  MotionConfig motion;
  double flag_cost = 0.0;  // added to the learned option's mean SAD, sample units
};

enum class BlockChoice : int { Integer = 0, Standard = 1, Learned = 2 };

struct BlockEval {
  Point origin;
  BlockSize size;
  BlockChoice choice = BlockChoice::Integer;
  int shift = -1;
  double standard_sad = 0.0;  // mean per pixel, sample units
  double learned_sad = 0.0;
  double chosen_sad = 0.0;    // distortion of the chosen prediction, no flag cost
};

/// Per-sequence switchable-filter statistics. SAD means are per pixel over
/// the fractional blocks; bpp_proxy is the per-pixel SAD of the chosen
/// prediction over all blocks, a distortion stand-in for rate.
struct EvalReport {
  std::string sequence;
  std::size_t frame_pairs = 0;
  std::size_t blocks = 0;
  std::size_t fractional_blocks = 0;
  std::size_t learned_selected = 0;
  double mean_sad_standard = 0.0;
  double mean_sad_switchable = 0.0;
  double saving_percent = 0.0;
  double selection_ratio = 0.0;
  double bpp_proxy = 0.0;
  std::vector<std::size_t> fractional_per_shift = std::vector<std::size_t>(kNumShifts, 0);
  std::vector<std::size_t> learned_per_shift = std::vector<std::size_t>(kNumShifts, 0);
  bool degenerate = false;  // no fractional blocks were found
};

/// Mean SAD margin, in sample units, below which learned and standard tie.
inline constexpr double kSadTieTolerance = 1e-6;

/// Decisions for every block of one frame pair. The learned filter for the
/// winning shift is chosen iff learned + flag_cost < standard - kSadTieTolerance;
/// ties go to the standard filter.
std::vector<BlockEval> evaluate_pair(const LumaPlane& prev, const LumaPlane& cur, const FilterSet& filters,
                                     const StandardFilterBank& bank, const EvalConfig& cfg);

/// Consecutive frame pairs of a sequence. Throws std::invalid_argument for
/// fewer than two frames.
EvalReport evaluate_switchable(std::span<const LumaPlane> frames, const FilterSet& filters,
                               const StandardFilterBank& bank, const EvalConfig& cfg);

/// Chosen-set labels on one block-size grid: 0 integer, 1 standard, 2 learned.
struct SelectionMap {
  BlockSize block;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> labels;  // row-major

  int at(std::size_t r, std::size_t c) const { return labels.at(r * cols + c); }
};

std::vector<SelectionMap> selection_map(const LumaPlane& prev, const LumaPlane& cur, const FilterSet& filters,
                                        const StandardFilterBank& bank, const EvalConfig& cfg);
void write_selection_map_csv(std::ostream& os, const SelectionMap& map);

/// Prediction-form set whose filter m is the bank's 8x8 outer-product kernel
/// placed so that its anchor tap sits at the centre.
FilterSet bank_equivalent_filterset(const StandardFilterBank& bank);

/// Prediction-form set holding the synthetic generator's windowed-sinc
/// shifts as 13x13 filters.
FilterSet windowed_sinc_filterset();

/// "filter_dy0.25_dx0.50"-style stem for shift m.
std::string filter_file_stem(int m);

/// Per shift, <stem>.csv with the coefficients and <stem>.pgm scaled from
/// min..max to 0..255, plus heatmap_norm.csv recording each min and max.
/// Throws std::runtime_error when a file cannot be written.
void dump_filter_heatmaps(const FilterSet& filters, const std::filesystem::path& dir);

/// Binary 8-bit PGM (P5).
void write_pgm(std::ostream& os, std::size_t width, std::size_t height, std::span<const unsigned char> pixels);

void write_report_csv(std::ostream& os, std::span<const EvalReport> reports);
void write_shift_histogram_csv(std::ostream& os, std::span<const EvalReport> reports);
void write_summary(std::ostream& os, std::span<const EvalReport> reports, double flag_cost);

}  // namespace fracfilt
