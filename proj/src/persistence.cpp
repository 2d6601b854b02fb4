#include "fracfilt/persistence.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "fracfilt/binary_io.hpp"
#include "fracfilt/error.hpp"

namespace fracfilt {

namespace {

constexpr char kCheckpointMagic[5] = {'F', 'C', 'K', 'P', 'T'};

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  /// Next line, or nullopt at end of stream.
  std::optional<std::string> next() {
    std::string line;
    if (!std::getline(is_, line)) return std::nullopt;
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  std::string expect(const char* what) {
    auto l = next();
    if (!l) fail(std::string("unexpected end of file, expected ") + what, line_ + 1);
    return *l;
  }

  std::uint64_t line() const noexcept { return line_; }

  [[noreturn]] static void fail(const std::string& msg, std::uint64_t line) {
    throw ParseError("FFLT: " + msg, line, ParseError::Unit::Line);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail(msg, line_); }

 private:
  std::istream& is_;
  std::uint64_t line_ = 0;
};

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string shift_header(int m) {
  const FractionalShift s = FractionalShift::from_index(m);
  return "# m=" + std::to_string(m) + " dy=" + FractionalShift::phase_name(s.quarter_y()) +
         " dx=" + FractionalShift::phase_name(s.quarter_x());
}

std::string missing_phase(int m) {
  const FractionalShift s = FractionalShift::from_index(m);
  return "missing filter for m=" + std::to_string(m) + " (dy=" + FractionalShift::phase_name(s.quarter_y()) +
         " dx=" + FractionalShift::phase_name(s.quarter_x()) + ")";
}

std::uint64_t parse_uint(const std::string& tok, const LineReader& lr, const char* what) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) lr.fail(std::string("bad ") + what + " '" + tok + "'");
  return v;
}

double parse_coefficient(const std::string& tok, const LineReader& lr) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) lr.fail("bad coefficient '" + tok + "'");
  if (!std::isfinite(v)) lr.fail("non-finite coefficient '" + tok + "'");
  return v;
}

std::ofstream open_write(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::ifstream open_read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return is;
}

}  // namespace

// ---------------------------------------------------------------------------
// FFLT

void write_filters(std::ostream& os, const FilterSet& fs) {
  fs.validate();
  const std::size_t n = fs[0].rows();
  os << "FFLT " << kFilterFileVersion << '\n'
     << "enumeration " << FilterSet::kEnumerationId << ' ' << fs.enumeration_version << '\n'
     << "prediction_form " << (fs.prediction_form ? 1 : 0) << '\n'
     << "source_hash " << (fs.source_hash.empty() ? "-" : fs.source_hash) << '\n'
     << "filters " << fs.size() << " size " << n << '\n';
  char buf[32];
  for (int m = 0; m < kNumShifts; ++m) {
    os << shift_header(m) << '\n';
    const Matrix2D& f = fs[static_cast<std::size_t>(m)];
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        // %g prints -0 for negative zero; normalize so files stay diffable.
        const double v = f(r, c) == 0.0 ? 0.0 : f(r, c);
        std::snprintf(buf, sizeof buf, "%.10g", v);
        os << (c ? " " : "") << buf;
      }
      os << '\n';
    }
  }
  if (!os) throw std::runtime_error("write_filters: stream write failed");
}

FilterSet read_filters(std::istream& is) {
  LineReader lr(is);
  FilterSet fs;

  auto magic = lr.next();
  if (!magic) LineReader::fail("empty file", 1);
  auto tok = split_ws(*magic);
  if (tok.size() != 2 || tok[0] != "FFLT") lr.fail("bad magic, not a filter file");
  const auto version = parse_uint(tok[1], lr, "version");
  if (version != kFilterFileVersion) {
    lr.fail("unsupported version " + std::to_string(version) + " (expected " + std::to_string(kFilterFileVersion) + ")");
  }

  tok = split_ws(lr.expect("enumeration line"));
  if (tok.size() != 3 || tok[0] != "enumeration") lr.fail("expected 'enumeration <id> <version>'");
  if (tok[1] != FilterSet::kEnumerationId) lr.fail("unknown shift enumeration '" + tok[1] + "'");
  fs.enumeration_version = static_cast<std::uint32_t>(parse_uint(tok[2], lr, "enumeration version"));
  if (fs.enumeration_version != FilterSet::kEnumerationVersion) {
    lr.fail("unsupported enumeration version " + tok[2]);
  }

  tok = split_ws(lr.expect("prediction_form line"));
  if (tok.size() != 2 || tok[0] != "prediction_form" || (tok[1] != "0" && tok[1] != "1")) {
    lr.fail("expected 'prediction_form 0|1'");
  }
  fs.prediction_form = tok[1] == "1";

  tok = split_ws(lr.expect("source_hash line"));
  if (tok.size() != 2 || tok[0] != "source_hash") lr.fail("expected 'source_hash <hash>'");
  fs.source_hash = tok[1] == "-" ? "" : tok[1];

  tok = split_ws(lr.expect("filters line"));
  if (tok.size() != 4 || tok[0] != "filters" || tok[2] != "size") lr.fail("expected 'filters <count> size <n>'");
  const auto count = parse_uint(tok[1], lr, "filter count");
  const auto n = parse_uint(tok[3], lr, "filter size");
  if (n == 0 || n % 2 == 0 || n > 255) lr.fail("filter size must be odd and at most 255");
  if (count > static_cast<std::uint64_t>(kNumShifts)) lr.fail("more than 15 filters declared");

  for (int m = 0; m < kNumShifts; ++m) {
    auto header = lr.next();
    while (header && split_ws(*header).empty()) header = lr.next();
    if (!header) LineReader::fail(missing_phase(m), lr.line() + 1);
    if (*header != shift_header(m)) {
      if (header->rfind("# m=", 0) == 0) lr.fail(missing_phase(m) + "; found '" + *header + "'");
      lr.fail("expected '" + shift_header(m) + "'");
    }
    Matrix2D f(n, n);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = lr.next();
      if (!row) LineReader::fail("truncated filter m=" + std::to_string(m), lr.line() + 1);
      const auto vals = split_ws(*row);
      if (vals.size() != n) {
        lr.fail("filter m=" + std::to_string(m) + " row " + std::to_string(r) + " has " + std::to_string(vals.size()) +
                " values, expected " + std::to_string(n));
      }
      for (std::size_t c = 0; c < n; ++c) f(r, c) = parse_coefficient(vals[c], lr);
    }
    fs.filters.push_back(std::move(f));
  }
  if (count != static_cast<std::uint64_t>(kNumShifts)) {
    lr.fail("header declares " + std::to_string(count) + " filters, expected 15");
  }
  while (auto extra = lr.next()) {
    if (!split_ws(*extra).empty()) lr.fail("unexpected content after the last filter");
  }
  return fs;
}

void save_filters(const std::filesystem::path& path, const FilterSet& fs) {
  std::ofstream os = open_write(path);
  write_filters(os, fs);
}

FilterSet load_filters(const std::filesystem::path& path) {
  std::ifstream is = open_read(path);
  return read_filters(is);
}

// ---------------------------------------------------------------------------
// FCKPT

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  const LinearConvNet& net = ckpt.net;
  const NetDims& d = net.dims();
  const std::vector<double> params = net.flatten();

  // Header size is fixed, so the log offset is known before writing.
  constexpr std::uint64_t kHeader = 5 + 4 + 1 + 6 * 4 + 8 + 8;
  std::uint64_t body = 4ull * params.size() + 1;
  if (ckpt.optimizer) body += 8 + 4 * 8 + params.size() * (8 + 8 + 8);
  const std::uint64_t log_offset = ckpt.training_log.empty() ? 0 : kHeader + body;

  if (ckpt.optimizer) {
    const AdamState& a = *ckpt.optimizer;
    if (a.first_moment.size() != params.size() || a.second_moment.size() != params.size() ||
        a.updates.size() != params.size()) {
      throw ShapeError("write_checkpoint: optimizer state does not match the net");
    }
  }

  os.write(kCheckpointMagic, 5);
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(net.topology()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.branches));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.trunk_count()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.l1_kernels));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.l2_kernels));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.l1_size));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.l3_size));
  io::write_le<std::uint64_t>(os, log_offset);
  io::write_le<std::uint64_t>(os, params.size());
  for (double v : params) io::write_le<float>(os, static_cast<float>(v));
  io::write_le<std::uint8_t>(os, ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const AdamState& a = *ckpt.optimizer;
    io::write_le<std::uint64_t>(os, a.step);
    io::write_le<double>(os, a.config.learning_rate);
    io::write_le<double>(os, a.config.beta1);
    io::write_le<double>(os, a.config.beta2);
    io::write_le<double>(os, a.config.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
      io::write_le<double>(os, a.first_moment[i]);
      io::write_le<double>(os, a.second_moment[i]);
      io::write_le<std::uint64_t>(os, a.updates[i]);
    }
  }
  if (log_offset != 0) {
    io::write_le<std::uint64_t>(os, ckpt.training_log.size());
    os.write(ckpt.training_log.data(), static_cast<std::streamsize>(ckpt.training_log.size()));
  }
  if (!os) throw std::runtime_error("write_checkpoint: stream write failed");
}

Checkpoint read_checkpoint(std::istream& is, std::optional<Topology> expected) {
  io::Reader rd(is, "FCKPT checkpoint");
  char magic[5];
  rd.read_bytes(magic, 5, "magic");
  if (!std::equal(magic, magic + 5, kCheckpointMagic)) rd.fail("not an FCKPT checkpoint (bad magic)");
  const auto version = rd.read<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    rd.fail("unsupported FCKPT version " + std::to_string(version) + " (expected " +
            std::to_string(kCheckpointVersion) + ")");
  }
  const auto tag = rd.read<std::uint8_t>("topology");
  if (tag > 1) rd.fail("unknown topology tag " + std::to_string(tag));
  const auto topology = static_cast<Topology>(tag);
  if (expected && *expected != topology) {
    rd.fail(std::string("checkpoint holds a ") + topology_name(topology) + " net, expected " + topology_name(*expected));
  }
  NetDims d;
  d.branches = rd.read<std::uint32_t>("branches");
  const auto trunks = rd.read<std::uint32_t>("trunks");
  d.l1_kernels = rd.read<std::uint32_t>("l1_kernels");
  d.l2_kernels = rd.read<std::uint32_t>("l2_kernels");
  d.l1_size = rd.read<std::uint32_t>("l1_size");
  d.l3_size = rd.read<std::uint32_t>("l3_size");
  if (d.branches == 0 || d.branches > 1024 || d.l1_kernels == 0 || d.l1_kernels > 4096 || d.l2_kernels == 0 ||
      d.l2_kernels > 4096 || d.l1_size == 0 || d.l1_size > 63 || d.l3_size == 0 || d.l3_size > 63) {
    rd.fail("implausible network dimensions");
  }
  const std::size_t expected_trunks = topology == Topology::Shared ? 1 : d.branches;
  if (trunks != expected_trunks) rd.fail("trunk count " + std::to_string(trunks) + " does not match topology");
  const auto log_offset = rd.read<std::uint64_t>("log offset");

  Checkpoint ck{LinearConvNet(topology, d), std::nullopt, {}};
  const auto count = rd.read<std::uint64_t>("parameter count");
  if (count != ck.net.parameter_count()) {
    rd.fail("parameter count " + std::to_string(count) + " does not match dimensions (" +
            std::to_string(ck.net.parameter_count()) + ")");
  }
  std::vector<double> params(count);
  for (double& v : params) {
    v = rd.read<float>("weights");
    if (!std::isfinite(v)) rd.fail("non-finite weight");
  }
  ck.net.assign(params);

  const auto has_opt = rd.read<std::uint8_t>("optimizer flag");
  if (has_opt > 1) rd.fail("bad optimizer flag");
  if (has_opt == 1) {
    AdamState a;
    a.step = rd.read<std::uint64_t>("adam step");
    a.config.learning_rate = rd.read<double>("learning rate");
    a.config.beta1 = rd.read<double>("beta1");
    a.config.beta2 = rd.read<double>("beta2");
    a.config.epsilon = rd.read<double>("epsilon");
    a.first_moment.resize(count);
    a.second_moment.resize(count);
    a.updates.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      a.first_moment[i] = rd.read<double>("first moment");
      a.second_moment[i] = rd.read<double>("second moment");
      a.updates[i] = rd.read<std::uint64_t>("update count");
    }
    ck.optimizer = std::move(a);
  }
  if (log_offset != 0) {
    if (log_offset != rd.offset()) rd.fail("log offset " + std::to_string(log_offset) + " does not follow the weights");
    const auto len = rd.read<std::uint64_t>("log length");
    if (len > (1ull << 32)) rd.fail("implausible log length");
    ck.training_log.resize(len);
    rd.read_bytes(ck.training_log.data(), len, "training log");
  }
  if (!rd.at_end()) rd.fail("trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os = open_write(path);
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<Topology> expected) {
  std::ifstream is = open_read(path);
  return read_checkpoint(is, expected);
}

}  // namespace fracfilt
