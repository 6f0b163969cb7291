#include "ieti/cli.hpp"

int main(int argc, char** argv) { return ieti::run_cli(argc, argv); }
