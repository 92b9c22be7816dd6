#include "selfdoubt/cli.hpp"

int main(int argc, char** argv) { return selfdoubt::cli_main(argc, argv); }
