#include "cli.hpp"

int main(int argc, char** argv) { return crysdiff::cli::run(argc, argv); }
