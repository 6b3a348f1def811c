#include <iostream>

#include "spdl/cli.hpp"

int main(int argc, char** argv) { return spdl::cli_main(argc, argv, std::cout, std::cerr); }
