#include "bidhi/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return bidhi::run_cli(argc, argv, std::cout, std::cerr);
}
