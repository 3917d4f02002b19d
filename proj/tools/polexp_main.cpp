#include <iostream>

#include "polexp/cli/app.hpp"

int main(int argc, char** argv) { return polexp::cli::run_app(argc, argv, std::cout, std::cerr); }
