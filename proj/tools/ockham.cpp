#include <string>
#include <vector>

#include "ockham/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return ockham::cli::main_entry(args);
}
