#include <robust_scatter/cli.hpp>

int main(int argc, char** argv) { return robust_scatter::run_cli(argc, argv); }
