#include <iostream>

#include "triplemark/cli.hpp"

int main(int argc, char** argv) { return triplemark::cli::run_cli(argc, argv, std::cout, std::cerr); }
