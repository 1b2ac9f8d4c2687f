#include "cli_app.h"

auto main(int argc, char** argv) -> int { return lbp::cli::main_entry(argc, argv); }
