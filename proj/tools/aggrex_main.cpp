#include "aggrex/cli_app.hpp"

int main(int argc, char** argv) { return aggrex::run_cli(argc, argv); }
