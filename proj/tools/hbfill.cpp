#include "cli.hpp"

int main(int argc, char** argv) { return hbfill::cli::run(argc, argv); }
