#include "adaptsr/parallel.hpp"

#include <omp.h>

namespace adaptsr {

namespace {
int default_threads = 0;
}

void set_num_threads(int threads) {
  if (default_threads == 0) default_threads = omp_get_max_threads();
  omp_set_num_threads(threads >= 1 ? threads : default_threads);
}

int max_threads() { return omp_get_max_threads(); }

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

}  // namespace adaptsr
