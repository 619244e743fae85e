#include <string>
#include <vector>

#include "verdoc/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return verdoc::run_cli(args);
}
