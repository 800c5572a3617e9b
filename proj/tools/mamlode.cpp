#include "mamlode/cli.hpp"

int main(int argc, char** argv) { return mamlode::cli::main(argc, argv); }
