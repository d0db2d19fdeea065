#include "faith/threading.hpp"

namespace faith {

namespace {
int g_budget = static_cast<int>(std::thread::hardware_concurrency());
}

int thread_budget() { return g_budget < 1 ? 1 : g_budget; }

void set_thread_budget(int n) { g_budget = n < 1 ? 1 : n; }

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(thread_budget(), n);
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace faith
