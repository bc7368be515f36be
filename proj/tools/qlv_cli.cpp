#include "qlv/io/cli.hpp"

int main(int argc, char** argv) { return qlv::io::cli_main(argc, argv); }
