// Writes a synthetic moving-texture sequence as y4m, and optionally the
// windowed-sinc filters that generated its motion as FFLT.
// Usage: <out.y4m> <width> <height> <frames> <seed> [oracle.fflt]
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "fracfilt/dataset.hpp"
#include "fracfilt/evaluation.hpp"
#include "fracfilt/persistence.hpp"
#include "fracfilt/video_io.hpp"

int main(int argc, char** argv) {
  if (argc != 6 && argc != 7) {
    std::cerr << "usage: make_synthetic_y4m <out> <width> <height> <frames> <seed> [oracle.fflt]\n";
    return 2;
  }
  const auto frames = fracfilt::make_synthetic_sequence(std::strtoul(argv[2], nullptr, 10),
                                                        std::strtoul(argv[3], nullptr, 10),
                                                        std::strtoul(argv[4], nullptr, 10),
                                                        std::strtoull(argv[5], nullptr, 10));
  std::ofstream os(argv[1], std::ios::binary);
  fracfilt::write_y4m(os, frames);
  if (!os) return 1;
  if (argc == 7) fracfilt::save_filters(argv[6], fracfilt::windowed_sinc_filterset());
  return 0;
}
