#pragma once

namespace sten {

/// Raises the glibc mmap/trim thresholds so the multi-megabyte tensor
/// buffers a training step churns through are recycled on the heap instead
/// of being returned to the kernel and re-zeroed every graph. Call once at
/// process start; a no-op elsewhere than glibc.
void tune_allocator();

}  // namespace sten
