#pragma once

#include <cstddef>
#include <functional>

namespace llnlab {

/// 0 means "use the hardware concurrency".
unsigned resolve_threads(unsigned requested) noexcept;

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work is split
/// into contiguous blocks; callers write results into slot i and reduce in
/// index order afterwards, so outputs never depend on the worker count.
/// If bodies throw, the exception from the smallest failing index is rethrown.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace llnlab
