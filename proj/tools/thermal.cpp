#include <iostream>
#include <string>
#include <vector>

#include "thermal/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return thermal::cli::run(args, std::cout, std::cerr);
}
