#pragma once

#include <cstddef>
#include <functional>

namespace qhdboot {

// Process-wide thread budget. 0 means "not set": QHD_BOOT_THREADS is consulted,
// then the hardware concurrency.
void set_thread_budget(std::size_t threads);
std::size_t thread_budget();

// Runs body(i) for i in [0, count). Each index is executed exactly once; callers
// write results into slot i so the outcome never depends on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace qhdboot
