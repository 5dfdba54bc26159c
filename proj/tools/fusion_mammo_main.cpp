#include <iostream>
#include <string>
#include <vector>

#include "fusion_mammo/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fusion_mammo::cli::run(args, std::cout, std::cerr);
}
