#include "inout/cli.hpp"

int main(int argc, char** argv) { return inout::run_cli(argc, argv); }
