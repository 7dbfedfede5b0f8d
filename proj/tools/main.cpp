#include <iostream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "cli.hpp"

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Training allocates and frees large tensors every step; keep them on the heap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, -1);
#endif
  return dsm::cli_main(argc, argv, std::cout, std::cerr);
}
