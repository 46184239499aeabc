#include <iostream>

#include "isocone/cli.hpp"

int main(int argc, char** argv) { return isocone::cli_main(argc, argv, std::cout, std::cerr); }
