#include "mzlock/rng.hpp"

namespace mzlock {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master) ^ h);
}

RandomStream::RandomStream(std::uint64_t master_seed, std::string_view label) {
  const std::uint64_t s = derive_seed(master_seed, label);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  engine_.seed(seq);
}

std::int64_t RandomStream::binomial(std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  // A handful of gates per control step is the common case; direct trials
  // are cheaper there than setting up the library sampler.
  if (n <= 16) {
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      if (uniform_(engine_) < p) ++k;
    }
    return k;
  }
  std::binomial_distribution<std::int64_t> dist(n, p);
  return dist(engine_);
}

}  // namespace mzlock
