#include <iostream>

#include "gapmpcc/cli.hpp"

int main(int argc, char **argv) { return gapmpcc::run_cli(argc, argv, std::cout, std::cerr); }
