#include "afbc/cli.hpp"

int main(int argc, char** argv) { return afbc::run_cli(argc, argv); }
