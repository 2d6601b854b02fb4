#include "fracfilt/video_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "fracfilt/error.hpp"

namespace fracfilt {

namespace {

constexpr std::string_view kY4mMagic = "YUV4MPEG2";
constexpr std::size_t kMaxHeaderLine = 4096;

// Reads through the next '\n'; returns the line without it.
std::string read_line(std::istream& is, std::uint64_t& offset, const char* what) {
  std::string line;
  for (;;) {
    const int ch = is.get();
    if (ch == std::char_traits<char>::eof()) {
      throw ParseError(std::string("unterminated ") + what, offset, ParseError::Unit::Byte);
    }
    ++offset;
    if (ch == '\n') return line;
    line.push_back(static_cast<char>(ch));
    if (line.size() > kMaxHeaderLine) throw ParseError(std::string(what) + " too long", offset, ParseError::Unit::Byte);
  }
}

std::size_t parse_dim(const std::string& token, std::uint64_t offset) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(token.substr(1), &pos);
  } catch (const std::exception&) {
    throw ParseError("y4m: bad dimension tag '" + token + "'", offset, ParseError::Unit::Byte);
  }
  if (pos + 1 != token.size() || v == 0 || v > 65536) {
    throw ParseError("y4m: bad dimension tag '" + token + "'", offset, ParseError::Unit::Byte);
  }
  return v;
}

LumaPlane read_plane(std::istream& is, std::size_t width, std::size_t height, std::uint64_t& offset,
                     std::size_t frame_index) {
  std::vector<char> buf(width * height);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
    throw ParseError("truncated luma plane in frame " + std::to_string(frame_index), offset + static_cast<std::uint64_t>(is.gcount()),
                     ParseError::Unit::Byte);
  }
  offset += buf.size();
  std::vector<std::uint16_t> samples(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) samples[i] = static_cast<unsigned char>(buf[i]);
  return LumaPlane(width, height, 8, std::move(samples));
}

void skip_bytes(std::istream& is, std::size_t n, std::uint64_t& offset, std::size_t frame_index) {
  is.ignore(static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw ParseError("truncated chroma planes in frame " + std::to_string(frame_index),
                     offset + static_cast<std::uint64_t>(is.gcount()), ParseError::Unit::Byte);
  }
  offset += n;
}

std::size_t chroma_bytes_420(std::size_t width, std::size_t height) {
  return 2 * ((width + 1) / 2) * ((height + 1) / 2);
}

}  // namespace

VideoLuma parse_y4m(std::istream& is) {
  std::uint64_t offset = 0;
  if (is.peek() == std::char_traits<char>::eof()) throw ParseError("y4m: empty stream", 0, ParseError::Unit::Byte);
  const std::string header = read_line(is, offset, "y4m stream header");

  std::istringstream tokens(header);
  std::string token;
  tokens >> token;
  if (token != kY4mMagic) throw ParseError("y4m: missing YUV4MPEG2 signature", 0, ParseError::Unit::Byte);

  VideoLuma video;
  bool mono = false;
  while (tokens >> token) {
    switch (token[0]) {
      case 'W': video.width = parse_dim(token, 0); break;
      case 'H': video.height = parse_dim(token, 0); break;
      case 'C': {
        const std::string cs = token.substr(1);
        if (cs == "mono") {
          mono = true;
        } else if (cs != "420" && cs != "420jpeg" && cs != "420paldv" && cs != "420mpeg2") {
          throw ParseError("y4m: unsupported colour space C" + cs + " (need 8-bit 4:2:0)", 0, ParseError::Unit::Byte);
        }
        break;
      }
      default: break;  // F, I, A, X: not needed for luma extraction
    }
  }
  if (video.width == 0 || video.height == 0) throw ParseError("y4m: header lacks W or H", 0, ParseError::Unit::Byte);

  const std::size_t chroma = mono ? 0 : chroma_bytes_420(video.width, video.height);
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::uint64_t frame_start = offset;
    const std::string frame_header = read_line(is, offset, "y4m frame header");
    if (frame_header.rfind("FRAME", 0) != 0) {
      throw ParseError("y4m: expected FRAME marker", frame_start, ParseError::Unit::Byte);
    }
    const std::size_t index = video.frames.size();
    video.frames.push_back(read_plane(is, video.width, video.height, offset, index));
    skip_bytes(is, chroma, offset, index);
  }
  return video;
}

VideoLuma read_planar_420(std::istream& is, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw std::invalid_argument("read_planar_420: width and height must be positive");
  VideoLuma video{width, height, {}};
  std::uint64_t offset = 0;
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::size_t index = video.frames.size();
    video.frames.push_back(read_plane(is, width, height, offset, index));
    skip_bytes(is, chroma_bytes_420(width, height), offset, index);
  }
  return video;
}

VideoLuma read_video(const std::filesystem::path& path, std::optional<std::size_t> width,
                     std::optional<std::size_t> height) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open video " + path.string());
  if (path.extension() == ".y4m") return parse_y4m(is);
  if (!width || !height) throw std::invalid_argument("raw video " + path.string() + " needs --width and --height");
  return read_planar_420(is, *width, *height);
}

void write_y4m(std::ostream& os, std::span<const LumaPlane> frames, int fps) {
  if (frames.empty()) throw std::invalid_argument("write_y4m: no frames");
  const std::size_t w = frames[0].width();
  const std::size_t h = frames[0].height();
  os << kY4mMagic << " W" << w << " H" << h << " F" << fps << ":1 Ip A1:1 C420jpeg\n";
  const std::string chroma(chroma_bytes_420(w, h), static_cast<char>(128));
  std::string luma(w * h, '\0');
  for (const LumaPlane& f : frames) {
    if (f.width() != w || f.height() != h || f.bit_depth() != 8) {
      throw std::invalid_argument("write_y4m: frames must share size and be 8-bit");
    }
    for (std::size_t i = 0; i < luma.size(); ++i) luma[i] = static_cast<char>(f.samples()[i]);
    os << "FRAME\n";
    os.write(luma.data(), static_cast<std::streamsize>(luma.size()));
    os.write(chroma.data(), static_cast<std::streamsize>(chroma.size()));
  }
}

}  // namespace fracfilt
