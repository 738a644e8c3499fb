#include <iostream>
#include <string>
#include <vector>

#include "twdtw/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return twdtw::cli::run(args, std::cout, std::cerr);
}
