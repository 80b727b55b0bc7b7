#include <iostream>

#include "ucd/cli.hpp"

int main(int argc, char** argv) { return ucd::cli::run(argc, argv, std::cout, std::cerr); }
