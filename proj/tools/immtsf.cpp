#include "immtsf/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return immtsf::run_cli(argc, argv, std::cout, std::cerr); }
