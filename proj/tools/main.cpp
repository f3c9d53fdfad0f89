#include "lnared/cli.hpp"

int main(int argc, char** argv) { return lnared::run_command(argc, argv); }
