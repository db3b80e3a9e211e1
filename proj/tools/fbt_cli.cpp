#include <string>
#include <vector>

#include "fbt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fbt::cli::run(args);
}
