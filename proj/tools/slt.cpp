#include "slt/cli.hpp"

int main(int argc, char** argv) { return slt::cli_dispatch(argc, argv); }
