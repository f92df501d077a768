#include "xinfid/parallel.hpp"

#include <algorithm>
#include <cstdlib>

namespace xinfid {

int worker_count() {
  long n = 0;
  if (const char* env = std::getenv("XINFID_THREADS")) n = std::strtol(env, nullptr, 10);
  if (n <= 0) n = static_cast<long>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  return static_cast<int>(std::min(n, 256L));
}

namespace detail {

void run_chunked(std::int64_t n_chunks, const std::function<void(std::int64_t)>& body) {
  const int workers = std::min<std::int64_t>(worker_count(), n_chunks);
  if (workers <= 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) body(c);
    return;
  }
  std::atomic<std::int64_t> next{0};
  auto drain = [&] {
    for (;;) {
      const std::int64_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= n_chunks) return;
      body(c);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(drain);
  drain();
  for (auto& th : pool) th.join();
}

}  // namespace detail

}  // namespace xinfid
