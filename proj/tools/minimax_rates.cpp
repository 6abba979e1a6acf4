#include <iostream>

#include "minimax/cli.hpp"

int main(int argc, char** argv) { return minimax::run_cli(argc, argv, std::cout, std::cerr); }
