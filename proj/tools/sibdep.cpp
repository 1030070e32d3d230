#include <iostream>

#include "sibdep/harness.hpp"

int main(int argc, char** argv) {
  return sibdep::harness::run(argc, argv, std::cout, std::cerr);
}
