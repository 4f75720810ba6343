#include <iostream>

#include "coalsim/cli.hpp"

int main(int argc, char** argv) {
  return coalsim::coalsim_main(argc, argv, std::cout, std::cerr);
}
