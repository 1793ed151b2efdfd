#include <iostream>
#include <string>
#include <vector>

#include "asf/cli/cli.hpp"
#include "asf/common/runtime.hpp"

int main(int argc, char** argv) {
  asf::tune_allocator();
  const std::vector<std::string> args(argv + 1, argv + argc);
  return asf::cli::run(args, std::cout, std::cerr);
}
