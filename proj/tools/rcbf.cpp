#include "rcbf/cli.hpp"

int main(int argc, char** argv) { return rcbf::cli::run_cli(argc, argv); }
