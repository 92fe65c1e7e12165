#include "bangbang/cli.hpp"

int main(int argc, char** argv) { return bangbang::cli::run(argc, argv); }
