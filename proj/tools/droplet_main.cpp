#include <iostream>

#include "droplet/cli.hpp"

int main(int argc, char** argv)
{
    return droplet::cli::run(argc, argv, std::cout, std::cerr);
}
