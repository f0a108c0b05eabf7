#include "hessolve/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hessolve::cli::run(argc, argv, std::cout, std::cerr); }
