#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace logholder {

inline std::atomic<int>& thread_count_storage() {
  static std::atomic<int> n{0};
  return n;
}

inline int thread_count() {
  int n = thread_count_storage().load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline void set_thread_count(int n) { thread_count_storage().store(n); }

/// Compensated (Kahan) accumulator.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }

  double value() const { return sum; }
};

/// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, n).
/// The chunk decomposition depends only on (n, chunk_size), never on the
/// thread count, so per-chunk results combined in index order are
/// bit-identical for any number of workers.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, Fn&& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  int workers = thread_count();
  if (workers <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      std::size_t b = c * chunk_size;
      fn(c, b, std::min(n, b + chunk_size));
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= n_chunks || failed.load()) return;
      std::size_t b = c * chunk_size;
      try {
        fn(c, b, std::min(n, b + chunk_size));
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int spawn = static_cast<int>(std::min<std::size_t>(workers, n_chunks));
  pool.reserve(spawn);
  for (int i = 0; i < spawn; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

/// Chunked map-reduce: per-chunk partial sums (Kahan inside the callable),
/// combined sequentially in chunk order.
template <typename Fn>
double parallel_sum(std::size_t n, std::size_t chunk_size, Fn&& partial) {
  if (n == 0) return 0.0;
  if (chunk_size == 0) chunk_size = 1;
  std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  std::vector<double> parts(n_chunks, 0.0);
  parallel_chunks(n, chunk_size, [&](std::size_t c, std::size_t b, std::size_t e) {
    parts[c] = partial(b, e);
  });
  KahanSum total;
  for (double p : parts) total.add(p);
  return total.value();
}

}  // namespace logholder
