#include "dfrc/pipeline.hpp"

int main(int argc, char** argv) { return dfrc::run_cli(argc, argv); }
