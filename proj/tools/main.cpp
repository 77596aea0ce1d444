#include <string>
#include <vector>

#include "segcal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return segcal::run_cli(args);
}
