#include <iostream>
#include <string>
#include <vector>

#include "bregman/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bregman::run_cli(args, std::cout, std::cerr);
}
