#include <iostream>

#include "loadbal/cli.hpp"

int main(int argc, char** argv) { return loadbal::cli::run(argc, argv, std::cout, std::cerr); }
