#include "cfs/cli.hpp"

int main(int argc, char** argv) { return cfs::cli::dispatch(argc, argv); }
