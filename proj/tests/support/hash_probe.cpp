// Prints token hashes for the argument tokens, one hex value per line. Used
// to check that hashes agree across separate processes.
#include <cstdio>

#include "satlog/types.hpp"

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i)
    std::printf("%016llx\n", static_cast<unsigned long long>(satlog::token_hash(argv[i])));
  return 0;
}
