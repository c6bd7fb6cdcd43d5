#include "clusterprobe/cli.hpp"

int main(int argc, char** argv) { return clusterprobe::cli::run(argc, argv); }
