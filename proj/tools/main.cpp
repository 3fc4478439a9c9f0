#include <iostream>
#include <string>
#include <vector>

#include "i3gn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return i3gn::cli::dispatch(args, std::cout, std::cerr);
}
