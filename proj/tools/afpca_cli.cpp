#include "afpca/cli.hpp"

int main(int argc, char** argv) { return afpca::cli_main(argc, argv); }
