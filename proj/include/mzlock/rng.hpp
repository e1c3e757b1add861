#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mzlock {

// Mixes a master seed with a stream label. The mapping is fixed (FNV-1a over
// the label, splitmix64 finalizer) so a given (seed, label) pair always names
// the same stream, independent of which other streams exist.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

// One independent, reproducible random stream.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::string_view label);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  // Number of successes in n Bernoulli(p) trials.
  std::int64_t binomial(std::int64_t n, double p);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace mzlock
