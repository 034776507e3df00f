#include "splitguard/harness/cli.hpp"

int main(int argc, char** argv) { return splitguard::harness::run_cli(argc, argv); }
