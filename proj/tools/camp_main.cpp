#include <string>
#include <vector>

#include "camp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return camp::run_cli(args);
}
