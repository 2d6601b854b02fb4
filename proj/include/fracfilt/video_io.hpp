#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "fracfilt/luma_plane.hpp"

namespace fracfilt {

struct VideoLuma {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<LumaPlane> frames;
};

/// Reads a YUV4MPEG2 stream carrying 8-bit 4:2:0 (or mono) video and keeps
/// the luma planes in display order. Throws ParseError (byte offset) for a
/// malformed header, an unsupported colour space or a truncated frame.
VideoLuma parse_y4m(std::istream& is);

/// Headerless planar 8-bit 4:2:0 frames of the given size, back to back.
VideoLuma read_planar_420(std::istream& is, std::size_t width, std::size_t height);

/// Picks the reader by extension: ".y4m" is parsed, anything else is read as
/// planar 4:2:0 and needs both dimensions.
VideoLuma read_video(const std::filesystem::path& path, std::optional<std::size_t> width = {},
                     std::optional<std::size_t> height = {});

/// Writes 8-bit frames as C420jpeg y4m with neutral chroma.
void write_y4m(std::ostream& os, std::span<const LumaPlane> frames, int fps = 30);

}  // namespace fracfilt
