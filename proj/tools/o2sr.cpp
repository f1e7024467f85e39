#include <iostream>
#include <string>
#include <vector>

#include "o2sr/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return o2sr::run_cli(args, std::cout, std::cerr);
}
