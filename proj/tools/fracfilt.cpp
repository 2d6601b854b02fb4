// fracfilt: dataset generation, training, evaluation and filter inspection.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print a
// single "fracfilt: error: ..." line on stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fracfilt/dataset.hpp"
#include "fracfilt/evaluation.hpp"
#include "fracfilt/model.hpp"
#include "fracfilt/persistence.hpp"
#include "fracfilt/training.hpp"
#include "fracfilt/video_io.hpp"

namespace fs = std::filesystem;
using namespace fracfilt;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct DatasetArgs {
  bool synthetic = false;
  bool me = false;
  std::size_t frames = 4;
  std::size_t per_cell = 16;
  std::size_t width = 128;
  std::size_t height = 128;
  std::optional<std::size_t> raw_width;
  std::optional<std::size_t> raw_height;
  std::vector<std::size_t> sizes;
  std::string in;
  int range = 8;
  std::string out;
  std::string stats;
};

struct TrainArgs {
  std::string mode = "competition";
  std::string data;
  TrainConfig cfg;
  std::optional<int> label;
  std::string out = ".";
};

struct EvalArgs {
  std::string filters;
  std::string in;
  std::optional<std::size_t> raw_width;
  std::optional<std::size_t> raw_height;
  std::string out = ".";
  bool maps = false;
  bool heatmaps = false;
  double flag_cost = 0.0;
  int range = 8;
  std::vector<std::size_t> sizes{4, 8, 16, 32};
};

struct CollapseArgs {
  std::string checkpoint;
  std::string out;
};

struct InspectArgs {
  std::string filters;
  std::string checkpoint;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("fracfilt");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("FRACFILT_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only honour it when asked for.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

std::vector<BlockSize> square_sizes(const std::vector<std::size_t>& sizes) {
  std::vector<BlockSize> out;
  for (std::size_t s : sizes) {
    if (s != 4 && s != 8 && s != 16 && s != 32) throw UsageError("block sizes must be 4, 8, 16 or 32");
    out.push_back({s, s});
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

template <class Fn>
void write_text(const fs::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  fn(os);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------

int cmd_dataset(const DatasetArgs& a, const Common& c) {
  if (a.synthetic == a.me) throw UsageError("choose exactly one of --synthetic and --me");
  Dataset raw;
  if (a.synthetic) {
    if (a.frames == 0 || a.per_cell == 0) throw UsageError("--frames and --per-cell must be positive");
    SyntheticConfig sc;
    if (!a.sizes.empty()) sc.block_sizes = square_sizes(a.sizes);
    sc.per_cell = a.per_cell;
    for (std::size_t f = 0; f < a.frames; ++f) {
      const LumaPlane frame = make_texture_frame(a.width, a.height, c.seed * 1000003 + f);
      sc.seed = c.seed * 7919 + f;
      auto samples = generate_synthetic_pairs(frame, sc);
      raw.samples.insert(raw.samples.end(), std::make_move_iterator(samples.begin()),
                         std::make_move_iterator(samples.end()));
    }
  } else {
    if (a.in.empty()) throw UsageError("--me needs --in");
    const VideoLuma video = read_video(a.in, a.raw_width, a.raw_height);
    if (video.frames.size() < 2) throw std::runtime_error(a.in + ": need at least two frames");
    MotionConfig mc;
    mc.range = a.range;
    mc.threads = c.threads;
    if (!a.sizes.empty()) mc.block_sizes = square_sizes(a.sizes);
    const StandardFilterBank bank;
    for (std::size_t f = 1; f < video.frames.size(); ++f) {
      auto samples = generate_me_pairs(video.frames[f - 1], video.frames[f], bank, mc);
      raw.samples.insert(raw.samples.end(), std::make_move_iterator(samples.begin()),
                         std::make_move_iterator(samples.end()));
    }
  }
  if (raw.samples.empty()) throw std::runtime_error("no training samples found; dataset would be empty");
  const Dataset balanced = balance(raw, c.seed);
  save_dataset(a.out, balanced);
  const std::string stats = a.stats.empty() ? a.out + ".stats.csv" : a.stats;
  write_text(stats, [&](std::ostream& os) { write_cell_stats_csv(os, raw.cell_counts(), balanced.cell_counts()); });
  spdlog::info("wrote {} samples ({} before balancing) to {}", balanced.samples.size(), raw.samples.size(), a.out);
  return 0;
}

int cmd_train(TrainArgs a, const Common& c) {
  const auto mode = parse_mode(a.mode);
  if (!mode) throw UsageError("--mode must be scratch, shared or competition");
  if (*mode == TrainMode::Scratch && !a.label) throw UsageError("--mode scratch needs --label");
  a.cfg.mode = *mode;
  a.cfg.label = a.label;
  a.cfg.seed = c.seed;
  a.cfg.threads = c.threads;
  try {
    a.cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Dataset data = load_dataset(a.data);
  const StandardFilterBank bank;
  spdlog::info("training {} net on {} samples", mode_name(*mode), data.samples.size());
  const TrainResult<LinearConvNet> res = train(a.cfg, data, bank);

  const fs::path out(a.out);
  ensure_dir(out);
  Checkpoint ck{res.net, res.optimizer, training_log_csv(res.log)};
  save_checkpoint(out / "model.fckpt", ck);
  save_filters(out / "filters.fflt", to_prediction_filterset(res.net));
  write_text(out / "train_log.csv", [&](std::ostream& os) { write_training_log(os, res.log); });

  char line[160];
  std::snprintf(line, sizeof line, "final validation loss: %.9g (initial %.9g, best epoch %zu of %zu)\n",
                res.best_validation, res.initial_validation, res.best_epoch, res.log.size());
  std::cout << line;
  return 0;
}

int cmd_eval(const EvalArgs& a, const Common& c) {
  if (a.flag_cost < 0.0) throw UsageError("--flag-cost must be >= 0");
  const FilterSet filters = load_filters(a.filters);
  if (!filters.prediction_form) throw std::runtime_error(a.filters + ": filters are not in prediction form");
  const VideoLuma video = read_video(a.in, a.raw_width, a.raw_height);
  const StandardFilterBank bank;
  EvalConfig cfg;
  cfg.flag_cost = a.flag_cost;
  cfg.motion.range = a.range;
  cfg.motion.threads = c.threads;
  cfg.motion.block_sizes = square_sizes(a.sizes);

  EvalReport rep = evaluate_switchable(video.frames, filters, bank, cfg);
  rep.sequence = fs::path(a.in).stem().string();
  const fs::path out(a.out);
  ensure_dir(out);
  const std::vector<EvalReport> reports{rep};
  write_text(out / "eval_report.csv", [&](std::ostream& os) { write_report_csv(os, reports); });
  write_text(out / "eval_shift_histogram.csv", [&](std::ostream& os) { write_shift_histogram_csv(os, reports); });
  std::ostringstream summary;
  write_summary(summary, reports, a.flag_cost);
  write_text(out / "eval_summary.txt", [&](std::ostream& os) { os << summary.str(); });
  std::cout << summary.str();

  if (a.maps) {
    const fs::path dir = out / "maps";
    ensure_dir(dir);
    for (std::size_t f = 1; f < video.frames.size(); ++f) {
      for (const SelectionMap& m : selection_map(video.frames[f - 1], video.frames[f], filters, bank, cfg)) {
        const std::string name = "selection_f" + std::to_string(f) + "_" + std::to_string(m.block.height) + "x" +
                                 std::to_string(m.block.width) + ".csv";
        write_text(dir / name, [&](std::ostream& os) { write_selection_map_csv(os, m); });
      }
    }
  }
  if (a.heatmaps) dump_filter_heatmaps(filters, out / "heatmaps");
  return 0;
}

int cmd_collapse(const CollapseArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  save_filters(a.out, to_prediction_filterset(ck.net));
  spdlog::info("collapsed {} net ({}) into {}", topology_name(ck.net.topology()), weights_hash(ck.net), a.out);
  return 0;
}

int cmd_inspect(const InspectArgs& a) {
  if (a.filters.empty() == a.checkpoint.empty()) throw UsageError("give exactly one of --filters and --checkpoint");
  FilterSet fs;
  if (!a.filters.empty()) {
    fs = load_filters(a.filters);
  } else {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    std::cout << "checkpoint: " << topology_name(ck.net.topology()) << " net, " << ck.net.parameter_count()
              << " parameters, hash " << weights_hash(ck.net) << '\n';
    fs = to_prediction_filterset(ck.net);
  }
  std::cout << "source " << (fs.source_hash.empty() ? "-" : fs.source_hash) << ", "
            << (fs.prediction_form ? "prediction" : "residual") << " form, " << fs.size() << " filters of "
            << fs[0].rows() << "x" << fs[0].cols() << '\n';
  std::cout << "m   dy   dx   sum        centre     min        max        l1\n";
  const std::size_t h = fs[0].rows() / 2;
  for (int m = 0; m < kNumShifts; ++m) {
    const Matrix2D& f = fs[static_cast<std::size_t>(m)];
    double lo = f.data()[0], hi = f.data()[0], l1 = 0.0;
    for (double v : f.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      l1 += std::abs(v);
    }
    const FractionalShift s = FractionalShift::from_index(m);
    char line[160];
    std::snprintf(line, sizeof line, "%-3d %-4s %-4s %-10.6f %-10.6f %-10.6f %-10.6f %.6f\n", m,
                  FractionalShift::phase_name(s.quarter_y()).c_str(), FractionalShift::phase_name(s.quarter_x()).c_str(),
                  f.sum(), f(h, h), lo, hi, l1);
    std::cout << line;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Learned quarter-pel interpolation filters: dataset, train, eval, collapse, inspect"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "random seed")->capture_default_str();
    sub->add_option("--threads", common.threads, "worker threads (1 = reproducible single thread, 0 = all cores)")
        ->capture_default_str();
  };

  DatasetArgs da;
  auto* ds = app.add_subcommand("dataset", "build a balanced FFDS training set");
  auto* syn = ds->add_flag("--synthetic", da.synthetic, "windowed-sinc shifts of random textures");
  auto* me = ds->add_flag("--me", da.me, "motion-estimated pairs from a video");
  syn->excludes(me);
  ds->add_option("--frames", da.frames, "synthetic texture frames")->capture_default_str();
  ds->add_option("--per-cell", da.per_cell, "synthetic samples per (shift, size) per frame")->capture_default_str();
  ds->add_option("--frame-width", da.width, "synthetic frame width")->capture_default_str();
  ds->add_option("--frame-height", da.height, "synthetic frame height")->capture_default_str();
  ds->add_option("--sizes", da.sizes, "square block sizes (default 8 16 synthetic, 4 8 16 32 ME)");
  ds->add_option("--in", da.in, "input video (.y4m, or raw 4:2:0 with --width/--height)");
  ds->add_option("--width", da.raw_width, "raw video width");
  ds->add_option("--height", da.raw_height, "raw video height");
  ds->add_option("--range", da.range, "integer search range")->capture_default_str()->check(CLI::Range(0, 64));
  ds->add_option("--out", da.out, "output FFDS file")->required();
  ds->add_option("--stats", da.stats, "per-cell count CSV (default <out>.stats.csv)");
  add_common(ds);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train a net and write checkpoint, filters and log");
  tr->add_option("--mode", ta.mode, "scratch, shared or competition")->capture_default_str();
  tr->add_option("--data", ta.data, "FFDS dataset")->required()->check(CLI::ExistingFile);
  tr->add_option("--epochs", ta.cfg.epochs)->capture_default_str();
  tr->add_option("--batch-size", ta.cfg.batch_size)->capture_default_str();
  tr->add_option("--lr", ta.cfg.learning_rate)->capture_default_str();
  tr->add_option("--patience", ta.cfg.patience, "early-stopping patience in epochs")->capture_default_str();
  tr->add_option("--clip-norm", ta.cfg.clip_norm)->capture_default_str();
  tr->add_option("--validation-fraction", ta.cfg.validation_fraction)->capture_default_str();
  tr->add_option("--label", ta.label, "train on one shift index only (required for scratch)");
  tr->add_option("--out", ta.out, "output directory")->capture_default_str();
  add_common(tr);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "switchable-filter evaluation on a video");
  ev->add_option("--filters", ea.filters, "FFLT filter file")->required()->check(CLI::ExistingFile);
  ev->add_option("--in", ea.in, "input video")->required()->check(CLI::ExistingFile);
  ev->add_option("--width", ea.raw_width, "raw video width");
  ev->add_option("--height", ea.raw_height, "raw video height");
  ev->add_option("--out", ea.out, "output directory")->capture_default_str();
  ev->add_flag("--maps", ea.maps, "write per-block selection maps");
  ev->add_flag("--heatmaps", ea.heatmaps, "write filter CSV/PGM heatmaps");
  ev->add_option("--flag-cost", ea.flag_cost, "SAD penalty on the learned option")->capture_default_str();
  ev->add_option("--range", ea.range, "integer search range")->capture_default_str()->check(CLI::Range(0, 64));
  ev->add_option("--sizes", ea.sizes, "square block sizes")->capture_default_str();
  add_common(ev);

  CollapseArgs ca;
  auto* co = app.add_subcommand("collapse", "checkpoint to FFLT filter file");
  co->add_option("--checkpoint", ca.checkpoint)->required()->check(CLI::ExistingFile);
  co->add_option("--out", ca.out)->required();

  InspectArgs ia;
  auto* in = app.add_subcommand("inspect", "print per-filter statistics");
  in->add_option("--filters", ia.filters)->check(CLI::ExistingFile);
  in->add_option("--checkpoint", ia.checkpoint)->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "fracfilt: usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*ds) return cmd_dataset(da, common);
    if (*tr) return cmd_train(ta, common);
    if (*ev) return cmd_eval(ea, common);
    if (*co) return cmd_collapse(ca);
    if (*in) return cmd_inspect(ia);
  } catch (const UsageError& e) {
    std::cerr << "fracfilt: usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "fracfilt: error: " << msg << '\n';
    return 1;
  }
  return 2;
}
