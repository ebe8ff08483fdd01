#include "qfc/cli.hpp"

int main(int argc, char** argv) { return qfc::cli::run_cli(argc, argv); }
