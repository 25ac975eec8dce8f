#include <iostream>

#include "ercmc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ercmc::run_cli(args, std::cout, std::cerr);
}
