#include "cli.hpp"

int main(int argc, char** argv) { return protofg3d::cli::run(argc, argv); }
