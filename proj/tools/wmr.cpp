#include <iostream>

#include "wmr/cli.hpp"

int main(int argc, char** argv) {
  return wmr::cli::cli_main(argc, argv, std::cout, std::cerr);
}
