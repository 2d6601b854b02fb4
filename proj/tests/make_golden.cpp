// Writes the format fixtures into the directory given on the command line.
#include <iostream>

#include "golden.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden <dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  fracfilt::save_filters(dir / fracfilt::testing::kGoldenFilters, fracfilt::testing::golden_filterset());
  fracfilt::save_checkpoint(dir / fracfilt::testing::kGoldenCheckpoint, fracfilt::testing::golden_checkpoint());
  return 0;
}
