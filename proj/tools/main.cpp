#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return obsel::cli_main(argc, argv, std::cout, std::cerr); }
