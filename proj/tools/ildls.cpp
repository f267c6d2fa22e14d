#include "ildls/cli.hpp"

int main(int argc, char** argv) { return ildls::cli::run_command(argc, argv); }
