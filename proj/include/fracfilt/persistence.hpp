#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include "fracfilt/model.hpp"
#include "fracfilt/numerics.hpp"

namespace fracfilt {

// FFLT: text filter sets.
//
//   FFLT 1
//   enumeration dydx-rowmajor-quarter 1
//   prediction_form 1
//   source_hash <16 hex digits or ->
//   filters 15 size 13
//   # m=0 dy=0 dx=1/4
//   <13 lines of 13 coefficients, 10 significant digits>
//   # m=1 dy=0 dx=1/2
//   ...
//
// Parse errors carry the 1-based line number.
inline constexpr std::uint32_t kFilterFileVersion = 1;

void write_filters(std::ostream& os, const FilterSet& fs);
FilterSet read_filters(std::istream& is);
void save_filters(const std::filesystem::path& path, const FilterSet& fs);
FilterSet load_filters(const std::filesystem::path& path);

// FCKPT: binary checkpoints, little-endian.
//
//   char[5] "FCKPT", u32 version, u8 topology (0 scratch, 1 shared),
//   u32 branches, trunks, l1_kernels, l2_kernels, l1_size, l3_size,
//   u64 log_offset (0 = no log), u64 parameter count, f32 weights in
//   LinearConvNet::flatten order, u8 has_optimizer, then if set:
//   u64 step, f64 lr, beta1, beta2, epsilon, and per parameter f64 first
//   moment, f64 second moment, u64 update count. At log_offset: u64 length
//   and that many bytes of training-log CSV.
//
// Weights are stored as f32; nets trained here hold f32 values already, so
// they round-trip bit for bit. Parse errors carry the byte offset.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  LinearConvNet net;
  std::optional<AdamState> optimizer;
  std::string training_log;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
/// Rejects unknown topology tags, and a topology other than `expected` when given.
Checkpoint read_checkpoint(std::istream& is, std::optional<Topology> expected = std::nullopt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<Topology> expected = std::nullopt);

}  // namespace fracfilt
