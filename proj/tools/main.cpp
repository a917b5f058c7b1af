#include "cli.hpp"

int main(int argc, char** argv) { return vqashap::run_cli(argc, argv); }
