#include "nlvc/cli.hpp"

int main(int argc, char** argv) { return nlvc::run_cli(argc, argv); }
