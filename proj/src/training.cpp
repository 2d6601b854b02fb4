#include "fracfilt/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "fracfilt/error.hpp"
#include "fracfilt/parallel.hpp"

namespace fracfilt {

namespace {

enum class Select { All, Label, Winner };

struct SampleGrad {
  std::vector<Matrix2D> grads;  // per branch, empty when the branch gets nothing
  double loss = 0.0;
  bool contributes = false;
  std::size_t winner = 0;
};

// d(mean |pred - gt|)/d(filter) for the sample's patch.
Matrix2D sad_filter_gradient(const Matrix2D& pred, const TrainingSample& s) {
  Matrix2D rg(pred.rows(), pred.cols());
  const double scale = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - s.target.data()[i];
    rg.data()[i] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
  }
  return filter_gradient(s.patch, rg);
}

std::vector<ParamRange> merge_ranges(std::vector<ParamRange> ranges) {
  std::sort(ranges.begin(), ranges.end(), [](const ParamRange& a, const ParamRange& b) { return a.begin < b.begin; });
  std::vector<ParamRange> out;
  for (const ParamRange& r : ranges) {
    if (r.size() == 0) continue;
    if (!out.empty() && r.begin <= out.back().end) {
      out.back().end = std::max(out.back().end, r.end);
    } else {
      out.push_back(r);
    }
  }
  return out;
}

template <FilterModel Net>
StepStats run_batch(Net& net, AdamState& opt, std::span<const TrainingSample> data, std::span<const std::size_t> idx,
                    std::span<const double> standard_best, Select select, const TrainConfig& cfg) {
  const std::vector<Matrix2D> filters = net.residual_filters();
  const std::size_t nb = net.branch_count();
  std::vector<SampleGrad> per(idx.size());

  parallel_for(idx.size(), cfg.threads, [&](std::size_t i) {
    const TrainingSample& s = data[idx[i]];
    SampleGrad& out = per[i];
    out.grads.resize(nb);
    switch (select) {
      case Select::All:
        for (std::size_t b = 0; b < nb; ++b) {
          const Matrix2D pred = predict(filters[b], s);
          out.loss += sad(pred, s.target);
          out.grads[b] = sad_filter_gradient(pred, s);
        }
        out.contributes = true;
        break;
      case Select::Label: {
        const auto b = static_cast<std::size_t>(s.label);
        if (b >= nb) throw ShapeError("training: label " + std::to_string(s.label) + " has no branch");
        const Matrix2D pred = predict(filters[b], s);
        out.loss = sad(pred, s.target);
        out.grads[b] = sad_filter_gradient(pred, s);
        out.contributes = true;
        break;
      }
      case Select::Winner: {
        const BranchLoss bl = branch_losses(filters, s, standard_best[idx[i]]);
        out.winner = bl.winner;
        out.loss = std::min(bl.losses[bl.winner], bl.standard_best);
        if (bl.learned_wins()) {
          out.contributes = true;
          out.grads[bl.winner] = sad_filter_gradient(predict(filters[bl.winner], s), s);
        }
        break;
      }
    }
  });

  // Ordered reduction keeps results independent of the thread count.
  StepStats stats;
  stats.blocks = idx.size();
  std::vector<Matrix2D> fg(nb);
  for (const SampleGrad& sg : per) {
    stats.loss += sg.loss;
    if (!sg.contributes) continue;
    ++stats.contributing;
    if (select == Select::Winner && sg.winner < stats.wins.size()) ++stats.wins[sg.winner];
    for (std::size_t b = 0; b < nb; ++b) {
      if (sg.grads[b].empty()) continue;
      if (fg[b].empty()) {
        fg[b] = sg.grads[b];
      } else {
        fg[b] += sg.grads[b];
      }
    }
  }

  std::vector<ParamRange> active;
  const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(idx.size(), 1));
  for (std::size_t b = 0; b < nb; ++b) {
    if (fg[b].empty()) continue;
    fg[b] *= inv;
    const auto r = net.branch_param_ranges(b);
    active.insert(active.end(), r.begin(), r.end());
  }
  if (active.empty()) return stats;

  std::vector<double> grads(net.parameter_count());
  net.filter_gradient_to_params(fg, grads);
  clip_global_norm(grads, cfg.clip_norm);
  std::vector<double> params = net.flatten();
  const std::vector<ParamRange> merged = merge_ranges(std::move(active));
  adam_step(params, grads, opt, merged);
  // Parameters live in 32-bit precision.
  for (const ParamRange& r : merged) {
    for (std::size_t i = r.begin; i < r.end; ++i) params[i] = round_to_f32(params[i]);
  }
  net.assign(params);
  stats.applied = true;
  return stats;
}

template <FilterModel Net>
StepStats run_epoch(Net& net, AdamState& opt, std::span<const TrainingSample> data, std::span<const double> standard_best,
                    Select select, Rng& rng, const TrainConfig& cfg) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  StepStats total;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t n = std::min(cfg.batch_size, order.size() - start);
    total.merge(run_batch(net, opt, data, std::span<const std::size_t>(order).subspan(start, n), standard_best, select, cfg));
  }
  return total;
}

void fill_uniform(std::span<double> values, double fan_in, Rng& rng, double gain = 1.0) {
  const double limit = gain * std::sqrt(3.0 / fan_in);
  for (double& v : values) v = round_to_f32(rng.uniform(-limit, limit));
}

std::vector<TrainingSample> gather(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<TrainingSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.samples[i]);
  return out;
}

}  // namespace

const char* mode_name(TrainMode mode) noexcept {
  switch (mode) {
    case TrainMode::Scratch: return "scratch";
    case TrainMode::Shared: return "shared";
    case TrainMode::Competition: return "competition";
  }
  return "?";
}

std::optional<TrainMode> parse_mode(std::string_view name) noexcept {
  if (name == "scratch") return TrainMode::Scratch;
  if (name == "shared") return TrainMode::Shared;
  if (name == "competition") return TrainMode::Competition;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be positive");
  if (patience == 0) throw std::invalid_argument("patience must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip norm must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 0.5)) {
    throw std::invalid_argument("validation fraction must lie in [0, 0.5)");
  }
  if (label && (*label < 0 || *label >= kNumShifts)) throw std::invalid_argument("label must lie in 0..14");
}

double sad(const Matrix2D& pred, const Matrix2D& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw ShapeError("sad: prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                     " vs ground truth " + std::to_string(gt.rows()) + "x" + std::to_string(gt.cols()));
  }
  if (pred.empty()) throw ShapeError("sad: empty block");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred.data()[i] - gt.data()[i]);
  return sum / static_cast<double>(pred.size());
}

double standard_best_sad(const TrainingSample& s, const StandardFilterBank& bank) {
  check_sample(s);
  const auto m = static_cast<int>(kPatchMargin);
  double best = std::numeric_limits<double>::infinity();
  for (int n = 0; n < kNumShifts; ++n) {
    const Matrix2D j = interp_standard(bank, s.patch, Point{m, m}, s.size(), FractionalShift::from_index(n));
    best = std::min(best, sad(j, s.target));
  }
  return best;
}

std::vector<double> standard_best_sads(std::span<const TrainingSample> samples, const StandardFilterBank& bank,
                                       unsigned threads) {
  std::vector<double> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) { out[i] = standard_best_sad(samples[i], bank); });
  return out;
}

Matrix2D predict(const Matrix2D& residual_filter, const TrainingSample& s) {
  const std::size_t h = residual_filter.rows() / 2;
  if (residual_filter.rows() != residual_filter.cols() || residual_filter.rows() != 2 * kPatchMargin + 1) {
    throw ShapeError("predict: residual filter must be 13x13");
  }
  Matrix2D y = apply_filter(residual_filter, s.patch);
  if (y.rows() != s.target.rows() || y.cols() != s.target.cols()) throw ShapeError("predict: patch/target mismatch");
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += s.patch(r + h, c + h);
  }
  return y;
}

BranchLoss branch_losses(std::span<const Matrix2D> residual_filters, const TrainingSample& s, double standard_best) {
  if (residual_filters.empty()) throw ShapeError("branch_losses: no filters");
  BranchLoss bl;
  bl.standard_best = standard_best;
  bl.losses.reserve(residual_filters.size());
  for (std::size_t b = 0; b < residual_filters.size(); ++b) {
    bl.losses.push_back(sad(predict(residual_filters[b], s), s.target));
    if (bl.losses[b] < bl.losses[bl.winner]) bl.winner = b;
  }
  return bl;
}

void StepStats::merge(const StepStats& other) {
  blocks += other.blocks;
  contributing += other.contributing;
  loss += other.loss;
  for (std::size_t i = 0; i < wins.size() && i < other.wins.size(); ++i) wins[i] += other.wins[i];
  applied = applied || other.applied;
}

void init_fan_in(LinearConvNet& net, Rng& rng, double branch_gain) {
  const NetDims& d = net.dims();
  for (std::size_t t = 0; t < net.trunk_count(); ++t) {
    fill_uniform(net.k1(t).data(), static_cast<double>(d.l1_size * d.l1_size), rng);
    fill_uniform(net.k2(t).data(), static_cast<double>(d.l1_kernels), rng);
  }
  for (std::size_t b = 0; b < net.branch_count(); ++b) {
    fill_uniform(net.k3(b).data(), static_cast<double>(d.l2_kernels * d.l3_size * d.l3_size), rng, branch_gain);
  }
}

void init_fan_in(SingleLayerNet& net, Rng& rng, double branch_gain) {
  const auto fan_in = static_cast<double>(net.support() * net.support());
  for (std::size_t b = 0; b < net.branch_count(); ++b) fill_uniform(net.kernel(b).data(), fan_in, rng, branch_gain);
}

template <FilterModel Net>
StepStats stage1_epoch(Net& net, AdamState& opt, std::span<const TrainingSample> data, Rng& rng,
                       const TrainConfig& cfg) {
  return run_epoch(net, opt, data, {}, Select::All, rng, cfg);
}

template <FilterModel Net>
StepStats stage2_epoch(Net& net, AdamState& opt, std::span<const TrainingSample> data, Rng& rng,
                       const TrainConfig& cfg) {
  std::vector<std::size_t> per_label(net.branch_count(), 0);
  for (const TrainingSample& s : data) {
    if (s.label >= 0 && static_cast<std::size_t>(s.label) < per_label.size()) ++per_label[static_cast<std::size_t>(s.label)];
  }
  for (std::size_t b = 0; b < per_label.size(); ++b) {
    if (per_label[b] == 0) spdlog::warn("matched stage: no blocks for shift {}, branch {} skipped", b, b);
  }
  return run_epoch(net, opt, data, {}, Select::Label, rng, cfg);
}

template <FilterModel Net>
StepStats stage3_step(Net& net, AdamState& opt, std::span<const TrainingSample> batch,
                      std::span<const double> standard_best, const TrainConfig& cfg) {
  if (standard_best.size() != batch.size()) throw ShapeError("stage3_step: one standard SAD per block required");
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return run_batch(net, opt, batch, idx, standard_best, Select::Winner, cfg);
}

Split split_dataset(std::size_t count, double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(count) * validation_fraction));
  if (count == 0 || n_val >= count || (validation_fraction > 0.0 && n_val == 0)) {
    throw std::invalid_argument("dataset of " + std::to_string(count) + " samples is too small to split with validation fraction " +
                                std::to_string(validation_fraction));
  }
  Split s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return s;
}

ValidationStats validation_stats(std::span<const Matrix2D> residual_filters, std::span<const TrainingSample> samples,
                                 std::span<const double> standard_best, TrainMode mode, unsigned threads) {
  ValidationStats vs;
  if (samples.empty()) return vs;
  const bool competition = mode == TrainMode::Competition;
  if (competition && standard_best.size() != samples.size()) {
    throw ShapeError("validation_stats: competition mode needs one standard SAD per block");
  }
  struct One {
    double loss = 0.0;
    bool win = false;
    std::size_t winner = 0;
  };
  std::vector<One> per(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const TrainingSample& s = samples[i];
    const double std_best = standard_best.empty() ? std::numeric_limits<double>::infinity() : standard_best[i];
    if (!competition) {
      // Only the label branch is scored; it wins when it beats the standard best.
      const auto b = static_cast<std::size_t>(s.label);
      if (b >= residual_filters.size()) throw ShapeError("validation: label " + std::to_string(s.label) + " has no branch");
      per[i].loss = sad(predict(residual_filters[b], s), s.target);
      per[i].winner = b;
      per[i].win = per[i].loss < std_best;
      return;
    }
    const BranchLoss bl = branch_losses(residual_filters, s, std_best);
    per[i].winner = bl.winner;
    per[i].win = bl.learned_wins();
    per[i].loss = std::min(bl.losses[bl.winner], std_best);
  });
  std::size_t wins = 0;
  for (const One& o : per) {
    vs.loss += o.loss;
    if (o.win) {
      ++wins;
      if (o.winner < vs.wins.size()) ++vs.wins[o.winner];
    }
  }
  vs.loss /= static_cast<double>(samples.size());
  vs.win_rate = static_cast<double>(wins) / static_cast<double>(samples.size());
  return vs;
}

template <FilterModel Net>
TrainResult<Net> train_model(Net initial, const TrainConfig& cfg, const Dataset& data, const StandardFilterBank& bank) {
  cfg.validate();
  Dataset subset;
  if (cfg.label) {
    for (const TrainingSample& s : data.samples) {
      if (s.label == *cfg.label) subset.samples.push_back(s);
    }
    if (subset.samples.empty()) throw std::invalid_argument("no samples with label " + std::to_string(*cfg.label));
  }
  const Dataset& used = cfg.label ? subset : data;
  for (const TrainingSample& s : used.samples) check_sample(s);

  const Split split = split_dataset(used.samples.size(), cfg.validation_fraction, cfg.seed);
  const std::vector<TrainingSample> train_set = gather(used, split.train);
  const std::vector<TrainingSample> val_set =
      split.validation.empty() ? train_set : gather(used, split.validation);

  // Standard predictions depend only on the patch; computed once.
  std::vector<double> train_std = standard_best_sads(train_set, bank, cfg.threads);
  std::vector<double> val_std = standard_best_sads(val_set, bank, cfg.threads);

  TrainResult<Net> res{std::move(initial), {}, {}, 0.0, 0.0, 0, false};
  res.optimizer = AdamState(res.net.parameter_count(), AdamConfig{cfg.learning_rate});
  Net best = res.net;
  {
    const auto filters = res.net.residual_filters();
    res.initial_validation = validation_stats(filters, val_set, val_std, cfg.mode, cfg.threads).loss;
  }
  res.best_validation = res.initial_validation;

  Rng rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochLog row;
    row.epoch = epoch;
    StepStats st;
    if (cfg.mode == TrainMode::Competition) {
      row.stage = epoch == 1 ? 1 : (epoch == 2 ? 2 : 3);
      if (row.stage == 1) {
        st = stage1_epoch(res.net, res.optimizer, train_set, rng, cfg);
      } else if (row.stage == 2) {
        st = stage2_epoch(res.net, res.optimizer, train_set, rng, cfg);
      } else {
        st = run_epoch(res.net, res.optimizer, std::span<const TrainingSample>(train_set), train_std, Select::Winner, rng, cfg);
      }
    } else {
      st = run_epoch(res.net, res.optimizer, std::span<const TrainingSample>(train_set), {}, Select::Label, rng, cfg);
    }
    row.train_loss = st.blocks == 0 ? 0.0 : st.loss / static_cast<double>(st.blocks);
    row.train_win_rate = row.stage == 3 ? st.win_rate() : 0.0;

    const auto filters = res.net.residual_filters();
    const ValidationStats vs = validation_stats(filters, val_set, val_std, cfg.mode, cfg.threads);
    row.validation_loss = vs.loss;
    row.validation_win_rate = vs.win_rate;
    row.validation_wins = vs.wins;
    res.log.push_back(row);
    spdlog::debug("epoch {} stage {} train {:.6f} val {:.6f}", epoch, row.stage, row.train_loss, row.validation_loss);

    if (vs.loss < res.best_validation) {
      res.best_validation = vs.loss;
      res.best_epoch = epoch;
      best = res.net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      res.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  res.net = std::move(best);
  return res;
}

TrainResult<LinearConvNet> train(const TrainConfig& cfg, const Dataset& data, const StandardFilterBank& bank,
                                 NetDims dims) {
  LinearConvNet net(cfg.mode == TrainMode::Scratch ? Topology::Scratch : Topology::Shared, dims);
  Rng rng(cfg.seed);
  init_fan_in(net, rng);
  return train_model(std::move(net), cfg, data, bank);
}

TrainResult<SingleLayerNet> train_single_layer(const TrainConfig& cfg, const Dataset& data,
                                               const StandardFilterBank& bank) {
  SingleLayerNet net;
  Rng rng(cfg.seed);
  init_fan_in(net, rng);
  return train_model(std::move(net), cfg, data, bank);
}

void write_training_log(std::ostream& os, std::span<const EpochLog> log) {
  os << "epoch,stage,train_loss,validation_loss,train_win_rate,validation_win_rate";
  for (int b = 0; b < kNumShifts; ++b) os << ",wins_" << b;
  os << '\n';
  const auto old_precision = os.precision(9);
  for (const EpochLog& r : log) {
    os << r.epoch << ',' << r.stage << ',' << r.train_loss << ',' << r.validation_loss << ',' << r.train_win_rate << ','
       << r.validation_win_rate;
    for (std::size_t w : r.validation_wins) os << ',' << w;
    os << '\n';
  }
  os.precision(old_precision);
}

std::string training_log_csv(std::span<const EpochLog> log) {
  std::ostringstream os;
  write_training_log(os, log);
  return os.str();
}

#define FRACFILT_INSTANTIATE(Net)                                                                                      \
  template StepStats stage1_epoch<Net>(Net&, AdamState&, std::span<const TrainingSample>, Rng&, const TrainConfig&);   \
  template StepStats stage2_epoch<Net>(Net&, AdamState&, std::span<const TrainingSample>, Rng&, const TrainConfig&);   \
  template StepStats stage3_step<Net>(Net&, AdamState&, std::span<const TrainingSample>, std::span<const double>,      \
                                      const TrainConfig&);                                                             \
  template TrainResult<Net> train_model<Net>(Net, const TrainConfig&, const Dataset&, const StandardFilterBank&);

FRACFILT_INSTANTIATE(LinearConvNet)
FRACFILT_INSTANTIATE(SingleLayerNet)

#undef FRACFILT_INSTANTIATE

}  // namespace fracfilt
