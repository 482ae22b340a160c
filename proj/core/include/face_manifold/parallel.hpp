#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace face_manifold {

/// Thread count used when a caller passes 0: FACE_MANIFOLD_THREADS if set and
/// valid, otherwise 1.
unsigned default_threads();

/// Returns `requested` when nonzero, otherwise default_threads().
unsigned resolve_threads(unsigned requested);

/// Splits [0, n) into at most `threads` contiguous chunks and calls
/// body(begin, end) once per chunk, concurrently. Callers write results to
/// index-determined slots; any reduction happens afterwards in index order.
/// Exceptions thrown by a chunk are rethrown on the calling thread.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace face_manifold
