#include "gencnippet/cli.hpp"

int main(int argc, char** argv) { return gencnippet::cli::dispatch(argc, argv); }
