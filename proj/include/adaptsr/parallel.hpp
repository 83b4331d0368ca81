#pragma once

#include <cstdint>

namespace adaptsr {

/// Caps the OpenMP team size used by the parallel kernels. Values < 1 restore
/// the runtime default. Results never depend on this setting.
void set_num_threads(int threads);
int max_threads();

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of the deterministic substream keyed by (seed, a, b). Every stochastic
/// kernel seeds a std::mt19937_64 with this, so results are independent of
/// scheduling and thread count.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept;

}  // namespace adaptsr
