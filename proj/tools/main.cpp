#include <iostream>
#include <string>
#include <vector>

#include "src/run.hpp"

int main(int argc, char** argv) {
  return qpww::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
