#pragma once

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace netens {

// printf-style helper (gcc 11 has no std::format)
inline std::string strf(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  char buf[512];
  vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return std::string(buf);
}

// Shortest round-trip decimal for doubles (CSV/JSON output).
inline std::string fmt_double(double x) {
  char buf[40];
  snprintf(buf, sizeof(buf), "%.17g", x);
  double back = 0;
  sscanf(buf, "%lf", &back);
  if (back == x) {
    for (int prec = 1; prec <= 16; ++prec) {
      char s[40];
      snprintf(s, sizeof(s), "%.*g", prec, x);
      double b = 0;
      sscanf(s, "%lf", &b);
      if (b == x) return std::string(s);
    }
  }
  return std::string(buf);
}

// Run fn(i) for i in [0, count) across `threads` workers.  Static block
// partition; the caller writes results into per-index slots so the final
// reduction order is independent of scheduling.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  if (threads <= 1 || count == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int nw = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  std::exception_ptr err;
  std::mutex err_mu;
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&, w]() {
      const int lo = static_cast<int>(static_cast<long long>(count) * w / nw);
      const int hi = static_cast<int>(static_cast<long long>(count) * (w + 1) / nw);
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// Pairwise (cascade) sum: deterministic and more accurate than a left fold.
// T needs operator+= ; items untouched.
template <class T>
T pairwise_sum(std::vector<T> items, T zero) {
  if (items.empty()) return zero;
  while (items.size() > 1) {
    std::size_t half = (items.size() + 1) / 2;
    for (std::size_t i = 0; i + half < items.size(); ++i) items[i] += items[i + half];
    items.resize(half);
  }
  return items[0];
}

} // namespace netens
