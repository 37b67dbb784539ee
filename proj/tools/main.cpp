#include "cli.hpp"

int main(int argc, char** argv) { return strokeforge::cli::run(argc, argv); }
