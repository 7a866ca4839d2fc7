#include "curio/cli.hpp"

int main(int argc, char** argv) { return curio::cli::cli_main(argc, argv); }
