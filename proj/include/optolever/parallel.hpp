#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace optolever::detail {

/// Evaluates fn(i) for i in [0, n) on up to `threads` workers. Output order
/// matches input order, so results do not depend on the thread count.
template <class Result, class Fn>
std::vector<Result> parallel_map(std::size_t n, unsigned threads, Fn&& fn) {
  std::vector<Result> out(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
    });
  }
  pool.clear();  // joins
  return out;
}

}  // namespace optolever::detail
