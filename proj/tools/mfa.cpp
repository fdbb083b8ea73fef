#include <mfa/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return mfa::cli::run_main(argc, argv, std::cout, std::cerr); }
