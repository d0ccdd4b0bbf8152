#include <iostream>
#include <string>
#include <vector>

#include "fashion/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fashion::run_cli(args, std::cout, std::cerr);
}
