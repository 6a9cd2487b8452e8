#include <iostream>

#include "cpsattack/cli.hpp"

int main(int argc, char** argv) { return cpsattack::cli::run(argc, argv, std::cout, std::cerr); }
