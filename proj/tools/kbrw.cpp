#include "kbrw/cli.hpp"

int main(int argc, char** argv) { return kbrw::cli::run_cli(argc, argv); }
