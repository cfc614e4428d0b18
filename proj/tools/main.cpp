#include <iostream>

#include "aerostate/cli.hpp"

int main(int argc, char** argv) { return aerostate::cli::run(argc, argv, std::cout, std::cerr); }
