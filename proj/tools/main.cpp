#include "cegnn/cli.hpp"

int main(int argc, char** argv) { return cegnn::cli::main(argc, argv); }
