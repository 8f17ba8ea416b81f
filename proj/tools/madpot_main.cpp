#include "madpot/cli.hpp"

int main(int argc, char** argv) { return madpot::run_cli(argc, argv); }
