#include <iostream>

#include "falkon/cli.hpp"

int main(int argc, char** argv) {
  return falkon::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
