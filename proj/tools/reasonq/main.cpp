#include "reasonq/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return reasonq::cli::run(argc, argv, std::cout, std::cerr); }
