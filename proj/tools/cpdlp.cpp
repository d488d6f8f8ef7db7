#include "cpdlp/cli.hpp"

int main(int argc, char** argv) { return cpdlp::cli::main(argc, argv); }
