#include <iostream>

#include "rfit_cli/cli.hpp"

int main(int argc, char** argv) {
  return rfit::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
