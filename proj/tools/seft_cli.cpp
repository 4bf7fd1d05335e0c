#include <iostream>

#include "seft/cli.hpp"

int main(int argc, char** argv) { return seft::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
