#include "v7w/cli/driver.hpp"

int main(int argc, char** argv) { return v7w::cli::main_entry(argc, argv); }
