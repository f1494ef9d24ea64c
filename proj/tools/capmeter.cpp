#include <iostream>
#include <string>
#include <vector>

#include "capmeter/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return capmeter::cli::run_cli(args, std::cout, std::cerr);
}
