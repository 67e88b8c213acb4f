#ifndef AGEPIM_RNG_HPP_
#define AGEPIM_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace agepim {

// All randomness flows from one root seed. Component/trial seeds are
// derived with a tagged splitmix64 hash so adding trials never perturbs
// earlier ones.
std::uint64_t splitmix64_next(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t index = 0);

// mt19937_64 with hand-rolled distributions. The standard pins the
// engine's output bit-for-bit; std:: distributions are implementation
// defined, so bounded draws and gaussians are implemented here to keep
// seeds portable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Unbiased draw from [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller (cached spare).
  double normal();

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// First k entries of a seeded Fisher-Yates permutation of [0, n).
std::vector<std::uint32_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                      std::size_t k);

// Seeded in-place Fisher-Yates shuffle.
void shuffle_indices(Rng& rng, std::vector<std::uint32_t>& idx);

}  // namespace agepim

#endif  // AGEPIM_RNG_HPP_
