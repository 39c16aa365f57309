#include "medex/cli.hpp"

int main(int argc, char** argv) { return medex::cli::run(argc, argv); }
