#include "planrl/cli.hpp"

int main(int argc, char **argv) { return planrl::cli::run(argc, argv); }
