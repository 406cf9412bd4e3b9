#include "wlrtr/cli.hpp"

int main(int argc, char** argv) { return wlrtr::run_cli(argc, argv); }
