#include "mc2g/cli.hpp"

int main(int argc, char** argv) { return mc2g::run_cli(argc, argv); }
