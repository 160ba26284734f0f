#include <iostream>

#include "mononext/cli.hpp"

int main(int argc, char** argv) { return mononext::run_cli(argc, argv, std::cout, std::cerr); }
