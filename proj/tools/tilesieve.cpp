#include "tilesieve/cli.hpp"

int main(int argc, char **argv) { return tilesieve::cli::run(argc, argv); }
