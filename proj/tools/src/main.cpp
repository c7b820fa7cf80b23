#include <iostream>
#include <string>
#include <vector>

#include "lfvg_cli/cli.hpp"

int main(int argc, char** argv) {
  return lfvg::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
