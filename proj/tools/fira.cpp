#include "fira/cli.hpp"

int main(int argc, char** argv) { return fira::cli::main(argc, argv); }
