#include <iostream>

#include "illumseg/cli.hpp"

int main(int argc, char** argv) { return illumseg::cli::run(argc, argv, std::cout, std::cerr); }
