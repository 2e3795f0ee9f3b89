#include "br/commands.hpp"

int main(int argc, char** argv) { return br::cli::run(argc, argv); }
