#include <iostream>

#include "reat/cli.hpp"

int main(int argc, char** argv) { return reat::cli_main(argc, argv, std::cout, std::cerr); }
