#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace faith {

// Global worker cap, settable from the CLI via --threads.
int thread_budget();
void set_thread_budget(int n);

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks so that
// any output written per-index is identical regardless of the budget.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace faith
