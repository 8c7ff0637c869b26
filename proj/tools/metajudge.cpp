#include <vector>

#include "metajudge/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return metajudge::cli::run_cli(args);
}
