#include <iostream>

#include "gkr/cli.hpp"

int main(int argc, char** argv) { return gkr::cli::run(argc, argv, std::cout, std::cerr); }
