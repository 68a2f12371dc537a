#include <iostream>
#include <string>
#include <vector>

#include "dovf/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return dovf::run_cli(args, std::cout, std::cerr);
}
