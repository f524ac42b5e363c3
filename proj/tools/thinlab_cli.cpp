#include "thinlab/cli.hpp"

int main(int argc, char** argv) { return thinlab::cli::run(argc, argv); }
