#include "sten/runtime.hpp"

#include <cstdlib>  // defines __GLIBC__ via the libc feature macros

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace sten {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
}

}  // namespace sten
