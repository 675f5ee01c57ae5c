#pragma once

#include <cstddef>
#include <functional>

namespace mrst {

/// Caps the number of worker threads used by column- and ray-parallel loops.
/// Defaults to 1. Results never depend on this value.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
/// so fn must only write to outputs indexed inside its own chunk.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_chunk = 256);

}  // namespace mrst
