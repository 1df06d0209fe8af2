#include <vector>

#include "uvcl/cli.hpp"

int main(int argc, char** argv) {
    return uvcl::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
