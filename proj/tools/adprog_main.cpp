#include <iostream>
#include <string>
#include <vector>

#include "adprog/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return adprog::cli::run(args, std::cout, std::cerr);
}
