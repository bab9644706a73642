#include <iostream>

#include "sds/cli.hpp"

int main(int argc, char** argv) { return sds::cli::run(argc, argv, std::cout, std::cerr); }
