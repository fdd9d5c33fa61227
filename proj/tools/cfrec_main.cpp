#include <vector>

#include "cfrec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cfrec::run_cli(args);
}
