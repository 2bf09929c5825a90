#include "cpsdet/cli.hpp"

int main(int argc, char** argv) { return cpsdet::run_cli(argc, argv); }
