#include <iostream>

#include "lexki/cli/app.hpp"

int main(int argc, char** argv) {
  return lexki::cli::run(argc, argv, {std::cin, std::cout, std::cerr});
}
