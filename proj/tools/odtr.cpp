#include <iostream>

#include "odtr/cli.hpp"

int main(int argc, char** argv) { return odtr::cli::run(argc, argv, std::cout, std::cerr); }
