#include "faith/cli.hpp"

int main(int argc, char** argv) { return faith::cli::run(argc, argv); }
