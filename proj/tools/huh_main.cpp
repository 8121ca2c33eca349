#include <iostream>

#include "huh/cli.hpp"

int main(int argc, char** argv) { return huh::run_cli(argc, argv, std::cout, std::cerr); }
