#include <string>
#include <vector>

#include "ligerlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ligerlab::cli::run(args);
}
