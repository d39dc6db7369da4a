#include "telic/cli.hpp"

int main(int argc, char** argv) { return telic::cli::main_entry(argc, argv); }
