#include <iostream>

#include "gsmat_cli.hpp"

int main(int argc, char** argv) { return gsmat::cli::run_cli(argc, argv, std::cout, std::cerr); }
