#include "pairtomo/cli.hpp"

int main(int argc, char** argv) { return pairtomo::cli::run_pipeline(argc, argv); }
