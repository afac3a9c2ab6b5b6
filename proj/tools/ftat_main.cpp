#include <iostream>

#include "ftat/cli.hpp"

int main(int argc, char** argv) {
  return ftat::run_cli(argc, argv, std::cout, std::cerr);
}
