#include "gsmrl/cli/app.hpp"

int main(int argc, char** argv) { return gsmrl::cli::run(argc, argv); }
