#include "lord/threads.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace lord {

namespace {
int g_thread_count = 0;
}

int thread_count() {
  if (g_thread_count > 0) return g_thread_count;
  if (const char* env = std::getenv("LORD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_thread_count(int n) { g_thread_count = n > 0 ? n : 0; }

int plan_workers(int nitems) { return std::max(1, std::min(thread_count(), nitems)); }

void parallel_items(int nitems, const std::function<void(int, int)>& fn) {
  if (nitems <= 0) return;
  const int workers = plan_workers(nitems);
  if (workers == 1) {
    for (int i = 0; i < nitems; ++i) fn(0, i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < nitems; i += workers) fn(w, i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace lord
