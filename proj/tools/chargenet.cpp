#include "chargenet/cli/commands.hpp"

int main(int argc, char** argv) { return chargenet::cli::run(argc, argv); }
