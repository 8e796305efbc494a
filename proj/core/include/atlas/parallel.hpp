// SPDX-License-Identifier: Apache-2.0

#ifndef ATLAS_PARALLEL_HPP
#define ATLAS_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace atlas {

/// Worker count from ATLAS_OPT_THREADS (0 or unset = hardware concurrency).
/// Read on every call so tests can change it at runtime.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n), split into contiguous chunks across workers.
/// Callers write results into per-index slots and reduce them afterwards in
/// index order, which keeps outputs independent of the worker count.
/// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace atlas

#endif  // ATLAS_PARALLEL_HPP
