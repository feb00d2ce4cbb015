#include <iostream>

#include "gsurvey/cli.hpp"

int main(int argc, char** argv) { return gsurvey::cli_dispatch(argc, argv, std::cout, std::cerr); }
