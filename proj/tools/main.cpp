#include "feffect/cli.hpp"

int main(int argc, char** argv) { return feffect::cli::dispatch(argc, argv); }
