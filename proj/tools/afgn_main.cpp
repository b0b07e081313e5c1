#include <string>
#include <vector>

#include "afgn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return afgn::cli::run(std::move(args));
}
