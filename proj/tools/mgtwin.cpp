#include "mgtwin/cli.hpp"

int main(int argc, char** argv) { return mgtwin::run_cli(argc, argv); }
