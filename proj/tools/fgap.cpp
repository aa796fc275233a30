#include "fgap/cli.hpp"

int main(int argc, char** argv) { return fgap::cli::run(argc, argv); }
