#pragma once

#include <cstdint>
#include <exception>
#include <thread>
#include <utility>
#include <vector>

namespace dopt {

// Worker count: explicit request > DOPT_THREADS env > hardware concurrency.
int resolve_threads(int requested);

// Splits [0, count) into at most `threads` contiguous chunks and runs
// fn(worker, begin, end) for each, worker 0 on the calling thread. The chunk
// boundaries depend only on (count, threads), never on scheduling.
template <typename Fn>
void run_chunked(std::uint64_t count, int threads, Fn&& fn) {
  if (count == 0) return;
  const auto t = static_cast<std::uint64_t>(threads) < count
                     ? static_cast<std::uint64_t>(threads)
                     : count;
  if (t <= 1) {
    fn(0, std::uint64_t{0}, count);
    return;
  }
  const std::uint64_t base = count / t;
  const std::uint64_t rem = count % t;
  std::vector<std::thread> pool;
  pool.reserve(t - 1);
  std::vector<std::exception_ptr> errors(t);
  std::uint64_t begin = base + (rem > 0 ? 1 : 0);
  for (std::uint64_t w = 1; w < t; ++w) {
    const std::uint64_t len = base + (w < rem ? 1 : 0);
    pool.emplace_back([&fn, &errors, w, begin, len] {
      try {
        fn(static_cast<int>(w), begin, begin + len);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
    begin += len;
  }
  try {
    fn(0, std::uint64_t{0}, base + (rem > 0 ? 1 : 0));
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace dopt
