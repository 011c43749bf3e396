#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace acoustiprobe {

/// Explicit count if given, else ACOUSTIPROBE_THREADS, else 1. Never 0.
std::size_t resolve_threads(std::optional<std::size_t> requested);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written by index; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace acoustiprobe
