#include <iostream>

#include "dvae/cli.hpp"

int main(int argc, char** argv) { return dvae::cli::run(argc, argv, std::cout, std::cerr); }
