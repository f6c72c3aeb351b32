#include "ringcorr/cli.hpp"

int main(int argc, char** argv) {
    return ringcorr::cli::run(argc, argv);
}
