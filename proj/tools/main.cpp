#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char ** argv)
{
  std::vector<std::string> tokens(argv, argv + argc);
  return ncsmpc::cli::run(tokens, std::cout, std::cerr);
}
