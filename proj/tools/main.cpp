#include <csignal>
#include <iostream>

#include "cli.hpp"
#include "dscat/parallel.hpp"

namespace {

extern "C" void on_interrupt(int) { dscat::cancel_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::vector<std::string> args(argv + 1, argv + argc);
  return dscat::cli::run_command(args, std::cout, std::cerr);
}
