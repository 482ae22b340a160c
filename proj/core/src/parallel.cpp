#include "face_manifold/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace face_manifold {

unsigned default_threads() {
  const char* env = std::getenv("FACE_MANIFOLD_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    const long value = std::stol(env);
    if (value >= 1 && value <= 1024) return static_cast<unsigned>(value);
  } catch (const std::exception&) {
  }
  return 1;
}

unsigned resolve_threads(unsigned requested) {
  return requested == 0 ? default_threads() : requested;
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(std::max(1U, threads), n);
  if (workers == 1) {
    body(0, n);
    return;
  }

  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  auto run = [&](std::size_t w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) return;
    try {
      body(begin, end);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  pool.clear();  // joins
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace face_manifold
