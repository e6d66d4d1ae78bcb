#include <iostream>

#include "ee/cli.hpp"

int main(int argc, char** argv) {
  return ee::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
