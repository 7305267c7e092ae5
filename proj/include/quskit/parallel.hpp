#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

namespace quskit {

/// Worker count: explicit override if set, else QUSKIT_THREADS, else hardware concurrency.
unsigned worker_count();

/// 0 clears the override.
void set_worker_count(unsigned n);

/// Runs body(i) for i in [0, n). Results must be written to per-index slots;
/// the first exception by index order is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Named, index-addressable sub-stream of a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t a = 0,
                          std::uint64_t b = 0);

}  // namespace quskit
