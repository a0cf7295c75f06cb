#include <iostream>

#include "smoothgev/cli.hpp"

int main(int argc, char** argv) { return smoothgev::cli::run(argc, argv, std::cout, std::cerr); }
