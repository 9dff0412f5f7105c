#include "pairsr/cli.hpp"

int main(int argc, char** argv) { return pairsr::dispatch(argc, argv); }
