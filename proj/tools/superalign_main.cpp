#include "superalign/cli.hpp"

int main(int argc, char** argv) { return superalign::cli_main(argc, argv); }
