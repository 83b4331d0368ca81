#include "adaptsr/cli.hpp"

int main(int argc, char** argv) { return adaptsr::cli::run_cli(argc, argv); }
