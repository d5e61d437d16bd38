#include "slicedict/cli.hpp"

int main(int argc, char** argv) {
  return slicedict::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
