#pragma once

namespace timediff {

/// Keeps large temporaries on the heap instead of fresh mmap'd pages.
/// Training and sampling allocate many same-sized multi-megabyte matrices;
/// with glibc's defaults each one costs page faults. No-op elsewhere.
void tune_allocator();

}  // namespace timediff
