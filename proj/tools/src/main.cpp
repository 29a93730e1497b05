#include <iostream>

#include "uwie_cli/cli.hpp"

int main(int argc, char** argv) {
  return uwie::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
