#include <iostream>

#include "swlab/harness.hpp"

int main(int argc, char** argv) {
  return swlab::parse_and_dispatch(argc, argv, std::cout, std::cerr);
}
