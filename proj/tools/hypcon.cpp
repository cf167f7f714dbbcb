#include <iostream>

#include "hypcon/cli.hpp"

int main(int argc, char** argv) { return hypcon::run_cli(argc, argv, std::cout, std::cerr); }
