#pragma once

// Process-level tuning shared by the executables.

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace inrlab {

/// Training allocates and frees the same large matrices every iteration.
/// glibc would hand each one back to the kernel and fault it in again; raising
/// the mmap and trim thresholds keeps those pages in the heap.
inline void tune_allocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace inrlab
