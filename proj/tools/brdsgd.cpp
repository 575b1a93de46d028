#include <iostream>

#include "brdsgd/cli.hpp"

int main(int argc, char** argv) {
  return brdsgd::cli::main(argc, argv, std::cout, std::cerr);
}
