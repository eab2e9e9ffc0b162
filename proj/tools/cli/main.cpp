#include "cli.hpp"

int main(int argc, char** argv) { return defocus::cli::run(argc, argv); }
