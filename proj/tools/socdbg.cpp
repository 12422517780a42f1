#include <iostream>

#include "socdbg/cli.hpp"

int main(int argc, char** argv) { return socdbg::run_cli(argc, argv, std::cout, std::cerr); }
