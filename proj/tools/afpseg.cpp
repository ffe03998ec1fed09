#include "afpseg/cli.hpp"

int main(int argc, char** argv) { return afpseg::cli::run(argc, argv); }
