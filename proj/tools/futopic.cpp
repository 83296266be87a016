#include "futopic/cli.hpp"

int main(int argc, char** argv) { return futopic::cli::run(argc, argv); }
