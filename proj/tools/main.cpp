#include <iostream>

#include "surgraw/cli.hpp"

int main(int argc, char** argv) { return surgraw::cli::run_cli(argc, argv, std::cout, std::cerr); }
