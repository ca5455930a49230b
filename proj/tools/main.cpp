#include "cli.hpp"

int main(int argc, char** argv) { return optolever::cli::run(argc, argv); }
