#include <iostream>
#include <string>
#include <vector>

#include "dmfg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dmfg::run_cli(args, std::cout, std::cerr);
}
