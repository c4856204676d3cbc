#include "protoflow/cli.hpp"

int main(int argc, char** argv) { return protoflow::cli_main(argc, argv); }
