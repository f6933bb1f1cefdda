#include <iostream>

#include "ptl/cli.hpp"

int main(int argc, char** argv) {
  return ptl::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
