#pragma once

#include <cstddef>
#include <functional>

namespace pcrnn {

// Runs fn(i) for i in [0, n) across up to `threads` workers (contiguous
// chunks). Tasks must write to disjoint locations; any cross-task reduction
// happens afterwards on the caller's thread in a fixed order, which is what
// keeps multi-threaded runs bit-identical to single-threaded ones.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace pcrnn
