#include "turnkit/cli.hpp"

int main(int argc, char** argv) { return turnkit::run(argc, argv); }
