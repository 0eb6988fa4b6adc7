#include <iostream>
#include <string>
#include <vector>

#include "pdca/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return pdca::cli::dispatch(args, std::cout, std::cerr);
}
