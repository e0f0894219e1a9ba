#include "tep/cli.hpp"

int main(int argc, char** argv) { return tep::cli::main(argc, argv); }
