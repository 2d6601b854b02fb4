#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fracfilt/evaluation.hpp"
#include "fracfilt/persistence.hpp"
#include "test_util.hpp"

using namespace fracfilt;
namespace fs = std::filesystem;

namespace {

const std::vector<LumaPlane>& sequence() {
  static const std::vector<LumaPlane> seq = make_synthetic_sequence(96, 96, 3, 8);
  return seq;
}

EvalConfig small_config(double flag_cost = 0.0) {
  EvalConfig cfg;
  cfg.motion.range = 4;
  cfg.motion.block_sizes = {{8, 8}, {16, 16}};
  cfg.flag_cost = flag_cost;
  return cfg;
}

FilterSet delta_filterset() {
  return filterset_from_residuals(std::vector<Matrix2D>(kNumShifts, Matrix2D(13, 13)), "delta");
}

FilterSet random_filterset(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Matrix2D> r;
  for (int m = 0; m < kNumShifts; ++m) r.push_back(fracfilt::testing::random_matrix(13, 13, rng, -0.01, 0.01));
  return filterset_from_residuals(std::move(r), "random");
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fracfilt_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("filter file stems") {
  CHECK(filter_file_stem(0) == "filter_dy0.00_dx0.25");
  CHECK(filter_file_stem(14) == "filter_dy0.75_dx0.75");
}

TEST_CASE("bank-equivalent filters reproduce the standard predictions exactly") {
  const StandardFilterBank bank;
  const FilterSet eq = bank_equivalent_filterset(bank);
  for (const auto& f : eq.filters) CHECK(f.sum() == doctest::Approx(1.0).epsilon(1e-15));
  const auto evals = evaluate_pair(sequence()[0], sequence()[1], eq, bank, small_config());
  std::size_t frac = 0;
  for (const BlockEval& e : evals) {
    if (e.choice == BlockChoice::Integer) continue;
    ++frac;
    CHECK(e.learned_sad == e.standard_sad);
    CHECK(e.choice == BlockChoice::Standard);
  }
  CHECK(frac > 10);
  const EvalReport r = evaluate_switchable(sequence(), eq, bank, small_config());
  CHECK(r.saving_percent == 0.0);
  CHECK(r.learned_selected == 0);
  CHECK(r.mean_sad_switchable == r.mean_sad_standard);
}

TEST_CASE("bank-equivalent filters read back from FFLT still tie with the standard bank") {
  std::stringstream ss;
  write_filters(ss, bank_equivalent_filterset(StandardFilterBank{}));
  const FilterSet loaded = read_filters(ss);
  const EvalReport r = evaluate_switchable(sequence(), loaded, StandardFilterBank{}, small_config());
  CHECK(r.learned_selected == 0);
  CHECK(std::abs(r.saving_percent) <= 1e-9);
}

TEST_CASE("delta filters are never selected") {
  const EvalReport r = evaluate_switchable(sequence(), delta_filterset(), StandardFilterBank{}, small_config());
  CHECK_FALSE(r.degenerate);
  CHECK(r.learned_selected == 0);
  CHECK(r.saving_percent == 0.0);
}

TEST_CASE("property: switchable SAD never exceeds standard SAD per block") {
  const StandardFilterBank bank;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto evals = evaluate_pair(sequence()[1], sequence()[2], random_filterset(seed), bank, small_config());
    for (const BlockEval& e : evals) {
      if (e.choice == BlockChoice::Integer) {
        CHECK(e.shift == -1);
        continue;
      }
      CHECK(e.chosen_sad <= e.standard_sad);
      if (e.choice == BlockChoice::Learned) {
        CHECK(e.learned_sad < e.standard_sad);
        CHECK(e.chosen_sad == e.learned_sad);
      } else {
        CHECK(e.learned_sad >= e.standard_sad - kSadTieTolerance);
        CHECK(e.chosen_sad == e.standard_sad);
      }
    }
  }
}

TEST_CASE("the windowed-sinc oracle beats the standard filters on the synthetic sequence") {
  const EvalReport r = evaluate_switchable(sequence(), windowed_sinc_filterset(), StandardFilterBank{}, small_config());
  CHECK(r.saving_percent >= 5.0);
  CHECK(r.selection_ratio > 0.3);
  CHECK(r.mean_sad_switchable < r.mean_sad_standard);
  std::size_t per_shift = 0;
  for (std::size_t n : r.fractional_per_shift) per_shift += n;
  CHECK(per_shift == r.fractional_blocks);
}

TEST_CASE("property: a higher flag cost never selects more learned blocks") {
  const FilterSet oracle = windowed_sinc_filterset();
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  double previous_saving = 1e9;
  for (double flag : {0.0, 0.25, 0.5, 1.0, 2.0, 1e9}) {
    const EvalReport r = evaluate_switchable(sequence(), oracle, StandardFilterBank{}, small_config(flag));
    CHECK(r.learned_selected <= previous);
    CHECK(r.saving_percent <= previous_saving);
    previous = r.learned_selected;
    previous_saving = r.saving_percent;
  }
  CHECK(previous == 0);
  CHECK_THROWS_AS(evaluate_switchable(sequence(), oracle, StandardFilterBank{}, small_config(-1.0)),
                  std::invalid_argument);
}

TEST_CASE("static frames are all integer and the report is degenerate") {
  const LumaPlane f = make_texture_frame(64, 64, 3);
  const std::vector<LumaPlane> frames{f, f, f};
  const EvalReport r = evaluate_switchable(frames, windowed_sinc_filterset(), StandardFilterBank{}, small_config());
  CHECK(r.degenerate);
  CHECK(r.frame_pairs == 2);
  CHECK(r.blocks == 2 * (64 + 16));
  CHECK(r.fractional_blocks == 0);
  CHECK(r.saving_percent == 0.0);
  CHECK(r.bpp_proxy == 0.0);
  std::ostringstream os;
  const std::vector<EvalReport> reports{r};
  write_summary(os, reports, 0.0);
  CHECK(os.str().find("no fractional blocks") != std::string::npos);

  const auto maps = selection_map(f, f, windowed_sinc_filterset(), StandardFilterBank{}, small_config());
  for (const auto& m : maps) {
    for (int l : m.labels) CHECK(l == 0);
  }
  CHECK_THROWS_AS(evaluate_switchable(std::span<const LumaPlane>(frames).first(1), windowed_sinc_filterset(),
                                      StandardFilterBank{}, small_config()),
                  std::invalid_argument);
}

TEST_CASE("selection maps follow the per-block choices") {
  const StandardFilterBank bank;
  const FilterSet oracle = windowed_sinc_filterset();
  const auto evals = evaluate_pair(sequence()[0], sequence()[1], oracle, bank, small_config());
  const auto maps = selection_map(sequence()[0], sequence()[1], oracle, bank, small_config());
  REQUIRE(maps.size() == 2);
  CHECK(maps[0].rows == 12);
  CHECK(maps[0].cols == 12);
  CHECK(maps[1].rows == 6);
  std::size_t k = 0;
  for (const auto& m : maps) {
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) {
        const BlockEval& e = evals[k++];
        CHECK(e.origin == Point{static_cast<int>(r * m.block.height), static_cast<int>(c * m.block.width)});
        CHECK(m.at(r, c) == static_cast<int>(e.choice));
      }
    }
  }
  std::ostringstream os;
  write_selection_map_csv(os, maps[1]);
  const std::string text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}

TEST_CASE("filter heatmaps") {
  const fs::path dir = scratch_dir("heatmaps");
  const FilterSet id = delta_filterset();
  dump_filter_heatmaps(id, dir);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  CHECK(files == 31);

  std::ifstream pgm(dir / "filter_dy0.50_dx0.25.pgm", std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(pgm), {}};
  const std::string header = "P5\n13 13\n255\n";
  REQUIRE(bytes.size() == header.size() + 169);
  CHECK(bytes.substr(0, header.size()) == header);
  for (std::size_t i = 0; i < 169; ++i) {
    CHECK(static_cast<unsigned char>(bytes[header.size() + i]) == (i == 6 * 13 + 6 ? 255 : 0));
  }

  // CSV values parse back exactly.
  const FilterSet sinc = windowed_sinc_filterset();
  dump_filter_heatmaps(sinc, dir);
  std::ifstream csv(dir / (filter_file_stem(9) + ".csv"));
  std::string line;
  std::size_t r = 0;
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      CHECK(std::stod(cell) == sinc[9](r, c));
      ++c;
    }
    CHECK(c == 13);
    ++r;
  }
  CHECK(r == 13);

  std::ifstream norm(dir / "heatmap_norm.csv");
  std::getline(norm, line);
  CHECK(line == "file,min,max");
  fs::remove_all(dir);
}

TEST_CASE("report writers") {
  const EvalReport r = evaluate_switchable(sequence(), windowed_sinc_filterset(), StandardFilterBank{}, small_config());
  std::vector<EvalReport> reports{r};
  reports[0].sequence = "synthetic";
  std::ostringstream csv, hist, summary;
  write_report_csv(csv, reports);
  write_shift_histogram_csv(hist, reports);
  write_summary(summary, reports, 0.0);
  CHECK(csv.str().find("\nsynthetic,2,") != std::string::npos);
  const std::string hist_text = hist.str();
  CHECK(std::count(hist_text.begin(), hist_text.end(), '\n') == 16);
  char expected[32];
  std::snprintf(expected, sizeof expected, "saving: %.2f%%", r.saving_percent);
  CHECK(summary.str().find(expected) != std::string::npos);
}
