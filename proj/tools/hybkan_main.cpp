#include "hybkan/cli.hpp"

int main(int argc, char** argv) { return hybkan::cli(argc, argv); }
