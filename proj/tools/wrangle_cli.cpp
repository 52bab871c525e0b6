#include <iostream>

#include "wrangle/cli.hpp"

int main(int argc, char** argv) { return wrangle::run_cli(argc, argv, std::cout, std::cerr); }
