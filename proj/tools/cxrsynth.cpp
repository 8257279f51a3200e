#include "cxrsynth/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cxrsynth::run_cli(argc, argv, std::cout, std::cerr); }
