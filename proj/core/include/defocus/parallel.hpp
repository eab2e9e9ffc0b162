#pragma once

#include <functional>

namespace defocus {

/// Caps internal parallelism; 0 restores the default (hardware concurrency).
/// Results of every library operation are independent of this setting.
void set_thread_count(int threads);
int thread_count();

/// Runs fn(i) for i in [begin, end), partitioned into contiguous chunks.
/// Each index is processed exactly once; no ordering between chunks.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace defocus
