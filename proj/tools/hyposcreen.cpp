#include <iostream>

#include "hyposcreen/cli.hpp"

int main(int argc, char** argv) { return hyposcreen::run_cli(argc, argv, std::cout, std::cerr); }
