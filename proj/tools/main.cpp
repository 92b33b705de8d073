#include "singhom/cli.hpp"

int main(int argc, char** argv) { return singhom::cli_main(argc, argv); }
