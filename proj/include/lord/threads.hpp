#ifndef LORD_THREADS_HPP
#define LORD_THREADS_HPP

#include <functional>

namespace lord {

/// Number of worker threads used by parallel passes.
/// Resolution order: set_thread_count(n > 0), else LORD_THREADS, else all cores.
int thread_count();

/// 0 restores the default (all cores / LORD_THREADS); 1 forces strict
/// sequential evaluation.
void set_thread_count(int n);

/// Static round-robin parallel loop: worker w handles items w, w + W, ...
/// so the item-to-worker map is a pure function of (nitems, W). Per-worker
/// accumulation buffers merged in worker order are therefore reproducible
/// for a fixed thread count, and bit-exact when W = 1.
void parallel_items(int nitems, const std::function<void(int worker, int item)>& fn);

/// Worker count parallel_items will use for nitems; sizes partial buffers.
int plan_workers(int nitems);

}  // namespace lord

#endif
