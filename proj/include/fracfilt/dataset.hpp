#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "fracfilt/luma_plane.hpp"
#include "fracfilt/numerics.hpp"
#include "fracfilt/standard_filters.hpp"

namespace fracfilt {

/// Margin around a block that a 13x13 prediction window needs.
inline constexpr std::size_t kPatchMargin = 6;

/// A reference patch, the block it should predict and the quarter-pel shift
/// between them. Values are normalized samples (8-bit / 255, f32-exact).
struct TrainingSample {
  Matrix2D patch;   // (H + 12) x (W + 12), centred on the integer anchor
  Matrix2D target;  // H x W ground truth
  int label = 0;    // FractionalShift index

  BlockSize size() const noexcept { return {target.rows(), target.cols()}; }
};

struct CellKey {
  int label = 0;
  BlockSize size;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct Dataset {
  std::vector<TrainingSample> samples;

  std::map<CellKey, std::size_t> cell_counts() const;
};

/// value / 255 rounded to f32; denormalize inverts it exactly for 8-bit values.
double normalize_sample(std::uint16_t value) noexcept;
std::uint16_t denormalize_sample(double value) noexcept;

/// Throws ShapeError unless patch = target + 12 on both axes and the label is valid.
void check_sample(const TrainingSample& s);

// ---------------------------------------------------------------------------
// Motion estimation

struct MotionConfig {
  int range = 8;
  std::vector<BlockSize> block_sizes{{4, 4}, {8, 8}, {16, 16}, {32, 32}};
  unsigned threads = 1;
};

struct MotionResult {
  Point origin;  // block position in the current frame
  BlockSize size;
  Point integer_mv;
  double integer_sad = 0.0;  // mean absolute difference, sample units
  bool fractional = false;   // a fractional candidate strictly beat integer
  Point anchor_mv;           // integer part of the fractional motion vector
  int shift = -1;            // FractionalShift index when fractional
  double fractional_sad = 0.0;
};

/// Full integer search in +-range followed by quarter-pel refinement over the
/// 60 fractional positions within one sample of the best integer vector
/// (anchors best, best-(0,1), best-(1,0), best-(1,1) x 15 phases). Ties go to
/// the integer vector, then to the earliest anchor and lowest shift index.
class MotionSearch {
 public:
  MotionSearch(const LumaPlane& reference, const StandardFilterBank& bank, int range);

  MotionResult search(const LumaPlane& current, Point origin, BlockSize size) const;

  /// Reference padded by margin() on every side; plane coordinate p maps to p + margin.
  const LumaPlane& padded_reference() const noexcept { return padded_; }
  int margin() const noexcept { return margin_; }
  Point to_padded(Point p) const noexcept { return {p.y + margin_, p.x + margin_}; }

  /// Normalized (H+12)x(W+12) patch whose centre block starts at plane position `anchor`.
  Matrix2D patch(Point anchor, BlockSize size) const;

 private:
  StandardFilterBank bank_;
  int range_;
  int margin_;
  LumaPlane padded_;
};

/// Motion search over a non-overlapping grid per block size (only complete blocks).
std::vector<MotionResult> motion_search_frame(const LumaPlane& prev, const LumaPlane& cur,
                                              const StandardFilterBank& bank, const MotionConfig& cfg);
std::vector<MotionResult> motion_search_frame(const MotionSearch& search, const LumaPlane& cur,
                                              const MotionConfig& cfg);

/// One sample per block whose best fractional candidate beats integer motion.
std::vector<TrainingSample> generate_me_pairs(const LumaPlane& prev, const LumaPlane& cur,
                                              const StandardFilterBank& bank, const MotionConfig& cfg);

// ---------------------------------------------------------------------------
// Synthetic data

/// 12-tap Hann-windowed sinc for a quarter-pel phase, taps at offsets -5..+6,
/// normalized to unit sum. Phase 0 is the identity.
std::array<double, 12> windowed_sinc_taps(int quarter_phase);

/// Block at `origin` displaced by `shift` through the windowed-sinc filter,
/// real-valued, in sample units. Needs 5 samples above/left and 6 below/right.
Matrix2D sinc_shift_block(const LumaPlane& frame, Point origin, BlockSize size, FractionalShift shift);

struct SyntheticConfig {
  std::vector<BlockSize> block_sizes{{8, 8}, {16, 16}};
  std::size_t per_cell = 16;  // samples per (shift, size)
  std::uint64_t seed = 1;
};

/// For each shift and block size, per_cell blocks at seeded random positions:
/// target = windowed-sinc shift of the frame, patch = unshifted surroundings.
std::vector<TrainingSample> generate_synthetic_pairs(const LumaPlane& frame, const SyntheticConfig& cfg);

/// Band-limited random texture (blurred Gaussian noise), 8-bit.
LumaPlane make_texture_frame(std::size_t width, std::size_t height, std::uint64_t seed);

/// Frame 0 is a texture; every later frame moves each tile of the previous
/// frame by a random integer offset in [-2, 2] plus a random quarter-pel
/// phase through the windowed sinc, rounded to 8 bits.
std::vector<LumaPlane> make_synthetic_sequence(std::size_t width, std::size_t height, std::size_t frames,
                                               std::uint64_t seed, std::size_t tile = 32);

// ---------------------------------------------------------------------------
// Balancing and storage

/// Seeded downsampling of every non-empty (label, size) cell to the smallest
/// cell count. Surviving samples keep their original order. Throws
/// std::invalid_argument on an empty dataset.
Dataset balance(const Dataset& ds, std::uint64_t seed);

/// "label,dy,dx,height,width,before,after" rows.
void write_cell_stats_csv(std::ostream& os, const std::map<CellKey, std::size_t>& before,
                          const std::map<CellKey, std::size_t>& after);

/// FFDS: "FFDS", u32 version (1), u64 count, then per sample u16 H, u16 W,
/// u8 label, H*W f32 target, (H+12)*(W+12) f32 patch; all little-endian.
void write_dataset(std::ostream& os, const Dataset& ds);
Dataset read_dataset(std::istream& is);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace fracfilt
