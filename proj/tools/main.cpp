#include "deconvo/cli.hpp"

int main(int argc, char** argv) { return deconvo::cli::run(argc, argv); }
