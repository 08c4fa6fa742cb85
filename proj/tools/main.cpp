#include <iostream>

#include "amrl/cli.hpp"

int main(int argc, char** argv) {
  return amrl::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
