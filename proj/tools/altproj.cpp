#include "altproj/cli.hpp"

int main(int argc, char** argv) { return altproj::cli_main(argc, argv); }
