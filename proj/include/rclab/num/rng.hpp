#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace rclab::num {

// Named seed derivation: every random stream in the project is keyed by
// (master seed, purpose string, indices). No ambient RNG.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::initializer_list<std::uint64_t> indices = {});

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, std::string_view purpose,
      std::initializer_list<std::uint64_t> indices = {})
      : engine_(derive_seed(master, purpose, indices)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return normal_(engine_); }
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace rclab::num
