#include "extremeforge/cli.hpp"

int main(int argc, char** argv) { return extremeforge::run_cli(argc, argv); }
