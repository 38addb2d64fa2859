#include <string>
#include <vector>

#include "chainflow/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return chainflow::run_cli(args);
}
