#include "aecr/cli/commands.hpp"

int main(int argc, char** argv) { return aecr::cli::run_cli(argc, argv); }
