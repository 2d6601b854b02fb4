#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fracfilt/dataset.hpp"
#include "fracfilt/model.hpp"
#include "fracfilt/numerics.hpp"
#include "fracfilt/random.hpp"
#include "fracfilt/standard_filters.hpp"

namespace fracfilt {

/// scratch: independent nets per shift, each trained on its own label subset.
/// shared: one trunk, every block trains its label's branch.
/// competition: joint warm-up, matched pre-training, then winner-take-all
/// updates gated by the standard filters.
enum class TrainMode { Scratch, Shared, Competition };

const char* mode_name(TrainMode mode) noexcept;
std::optional<TrainMode> parse_mode(std::string_view name) noexcept;

struct TrainConfig {
  std::size_t epochs = 1000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::size_t patience = 50;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  double validation_fraction = 0.1;
  TrainMode mode = TrainMode::Competition;
  std::optional<int> label;  // restrict training data to one shift
  unsigned threads = 1;

  /// Throws std::invalid_argument for non-positive sizes or rates, a
  /// validation fraction outside [0, 0.5) or a label outside 0..14.
  void validate() const;
};

/// Mean absolute difference. Throws ShapeError on mismatched dims.
double sad(const Matrix2D& pred, const Matrix2D& gt);

/// Best mean SAD over the 15 standard predictions of the sample's patch.
double standard_best_sad(const TrainingSample& s, const StandardFilterBank& bank);
std::vector<double> standard_best_sads(std::span<const TrainingSample> samples, const StandardFilterBank& bank,
                                       unsigned threads = 1);

/// Prediction of one residual filter on a sample: filter response plus the
/// collocated crop of the patch.
Matrix2D predict(const Matrix2D& residual_filter, const TrainingSample& s);

struct BranchLoss {
  std::vector<double> losses;  // l^b for every branch
  double standard_best = 0.0;
  std::size_t winner = 0;      // argmin, lowest index on ties

  bool learned_wins() const noexcept { return losses.at(winner) < standard_best; }
};

BranchLoss branch_losses(std::span<const Matrix2D> residual_filters, const TrainingSample& s, double standard_best);

struct StepStats {
  std::size_t blocks = 0;
  std::size_t contributing = 0;  // blocks that produced a gradient
  double loss = 0.0;             // summed over blocks, sum over contributing branches
  std::vector<std::size_t> wins = std::vector<std::size_t>(kNumShifts, 0);
  bool applied = false;          // an optimizer step was taken

  double win_rate() const noexcept { return blocks == 0 ? 0.0 : static_cast<double>(contributing) / blocks; }
  void merge(const StepStats& other);
};

/// Models exposing residual filters and their parameter chain rule:
/// LinearConvNet and SingleLayerNet.
template <class Net>
concept FilterModel = requires(const Net& cn, Net& n, std::span<const Matrix2D> g, std::span<double> out,
                               std::span<const double> p, std::size_t b) {
  { cn.residual_filters() } -> std::same_as<std::vector<Matrix2D>>;
  { cn.parameter_count() } -> std::convertible_to<std::size_t>;
  { cn.branch_count() } -> std::convertible_to<std::size_t>;
  { cn.branch_param_ranges(b) } -> std::same_as<std::vector<ParamRange>>;
  { cn.flatten() } -> std::same_as<std::vector<double>>;
  cn.filter_gradient_to_params(g, out);
  n.assign(p);
};

/// Scale applied to the fan-in bound of the output (branch) layer, so the
/// untrained residual starts small next to the identity path.
inline constexpr double kBranchInitGain = 0.1;

/// Uniform weights with variance 1/fan_in per layer; the branch layer is
/// further scaled by `branch_gain`.
void init_fan_in(LinearConvNet& net, Rng& rng, double branch_gain = kBranchInitGain);
void init_fan_in(SingleLayerNet& net, Rng& rng, double branch_gain = kBranchInitGain);

/// Joint epoch: every block trains all branches (labels ignored).
template <FilterModel Net>
StepStats stage1_epoch(Net& net, AdamState& opt, std::span<const TrainingSample> data, Rng& rng,
                       const TrainConfig& cfg);

/// Matched epoch: every block trains only its label's branch. Labels with no
/// blocks are logged as skipped.
template <FilterModel Net>
StepStats stage2_epoch(Net& net, AdamState& opt, std::span<const TrainingSample> data, Rng& rng,
                       const TrainConfig& cfg);

/// Competition update on one batch: each block trains its argmin branch only
/// if that branch strictly beats the best standard prediction.
template <FilterModel Net>
StepStats stage3_step(Net& net, AdamState& opt, std::span<const TrainingSample> batch,
                      std::span<const double> standard_best, const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  int stage = 0;          // 1..3 in competition mode, 0 otherwise
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double train_win_rate = 0.0;
  double validation_win_rate = 0.0;
  std::vector<std::size_t> validation_wins = std::vector<std::size_t>(kNumShifts, 0);
};

template <class Net>
struct TrainResult {
  Net net;
  AdamState optimizer;
  std::vector<EpochLog> log;
  double initial_validation = 0.0;
  double best_validation = 0.0;
  std::size_t best_epoch = 0;  // 0 = the initial weights were never beaten
  bool stopped_early = false;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle, the first round(n * fraction) indices validate. Throws
/// std::invalid_argument when either side would be empty.
Split split_dataset(std::size_t count, double validation_fraction, std::uint64_t seed);

struct ValidationStats {
  double loss = 0.0;
  double win_rate = 0.0;
  std::vector<std::size_t> wins = std::vector<std::size_t>(kNumShifts, 0);
};

/// Competition mode: mean of min(l^mu, standard best), and a win is a block
/// whose argmin branch beats the standard best. Otherwise the mean
/// label-branch SAD, and a win is a block whose label branch beats it.
ValidationStats validation_stats(std::span<const Matrix2D> residual_filters, std::span<const TrainingSample> samples,
                                 std::span<const double> standard_best, TrainMode mode, unsigned threads = 1);

/// Trains from `initial` weights and returns the best-validation snapshot.
template <FilterModel Net>
TrainResult<Net> train_model(Net initial, const TrainConfig& cfg, const Dataset& data, const StandardFilterBank& bank);

/// Fan-in initialized three-layer net (scratch topology in scratch mode,
/// shared otherwise), trained per cfg.
TrainResult<LinearConvNet> train(const TrainConfig& cfg, const Dataset& data, const StandardFilterBank& bank,
                                 NetDims dims = {});

/// The one-layer baseline: fifteen 13x13 kernels trained directly.
TrainResult<SingleLayerNet> train_single_layer(const TrainConfig& cfg, const Dataset& data,
                                               const StandardFilterBank& bank);

/// epoch,stage,train_loss,validation_loss,train_win_rate,validation_win_rate,wins_0..wins_14
void write_training_log(std::ostream& os, std::span<const EpochLog> log);
std::string training_log_csv(std::span<const EpochLog> log);

}  // namespace fracfilt
