#include <iostream>

#include "noilin/cli.hpp"

int main(int argc, char** argv) { return noilin::run_cli(argc, argv, std::cout, std::cerr); }
