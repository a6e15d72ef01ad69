#include <vector>

#include "dho/cli.hpp"

int main(int argc, char** argv) {
    return dho::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
