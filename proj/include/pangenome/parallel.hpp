#pragma once

#include <atomic>
#include <thread>
#include <vector>

#include "pangenome/rng.hpp"

namespace pangenome {

inline int default_thread_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Run `reps` replicates across `threads` workers.  Replicate r always draws
// from stream (seed, base stream + r), so results are a pure function of the
// seed no matter how replicates land on threads; callers reduce per-replicate
// outputs in index order afterwards.  `make_context` builds one worker-local
// context (sampler state, scratch buffers) per thread.
template <typename MakeContext, typename F>
inline void parallel_replicates_with_context(long reps, int threads,
                                             RngSpec base,
                                             MakeContext&& make_context,
                                             F&& per_replicate) {
  if (threads < 1) threads = 1;
  if (threads == 1 || reps < 2) {
    auto ctx = make_context();
    for (long r = 0; r < reps; ++r) {
      Rng rng(
          RngSpec{base.seed, base.stream_id + static_cast<std::uint64_t>(r)});
      per_replicate(r, rng, ctx);
    }
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      try {
        auto ctx = make_context();
        for (;;) {
          const long r = next.fetch_add(1, std::memory_order_relaxed);
          if (r >= reps || failed.load(std::memory_order_relaxed)) return;
          Rng rng(RngSpec{base.seed,
                          base.stream_id + static_cast<std::uint64_t>(r)});
          per_replicate(r, rng, ctx);
        }
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

template <typename F>
inline void parallel_replicates(long reps, int threads, RngSpec base,
                                F&& per_replicate) {
  parallel_replicates_with_context(
      reps, threads, base, []() { return 0; },
      [&](long r, Rng& rng, int&) { per_replicate(r, rng); });
}

}  // namespace pangenome
