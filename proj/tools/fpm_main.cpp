#include "fpm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fpm::cli::cli_main(argc, argv, std::cout, std::cerr); }
