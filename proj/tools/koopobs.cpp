#include <iostream>

#include "koopobs/cli.hpp"

int main(int argc, char** argv) { return koopobs::run_cli(argc, argv, std::cout, std::cerr); }
