#pragma once

// Deterministic parallel map over fixed-size chunks. Chunk boundaries depend
// only on (n, chunk), never on the worker count, and callers combine chunk
// results in index order, so outputs are bit-identical for any XINFID_THREADS.

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace xinfid {

// Worker cap from XINFID_THREADS (0 or unset = hardware concurrency).
int worker_count();

namespace detail {
void run_chunked(std::int64_t n_chunks, const std::function<void(std::int64_t)>& body);
}

// fn(chunk_index, begin, end) -> T; results returned in chunk order.
template <class T, class Fn>
std::vector<T> map_chunks(std::int64_t n, std::int64_t chunk, Fn&& fn) {
  if (n <= 0) return {};
  if (chunk < 1) chunk = 1;
  const std::int64_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<T> out(static_cast<std::size_t>(n_chunks));
  detail::run_chunked(n_chunks, [&](std::int64_t c) {
    const std::int64_t begin = c * chunk;
    const std::int64_t end = std::min(n, begin + chunk);
    out[static_cast<std::size_t>(c)] = fn(c, begin, end);
  });
  return out;
}

}  // namespace xinfid
