#include <iostream>
#include <string>
#include <vector>

#include "n2c/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return n2c::run_cli(args, std::cout, std::cerr);
}
