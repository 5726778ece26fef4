#include "coxpf/app/commands.hpp"

int main(int argc, char** argv) { return coxpf::app::run_cli(argc, argv); }
