#include "tbss/cli.hpp"

int main(int argc, char** argv) { return tbss::cli::run(argc, argv); }
