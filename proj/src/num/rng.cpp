#include "rclab/num/rng.hpp"

namespace rclab::num {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::initializer_list<std::uint64_t> indices) {
  // FNV-1a over the purpose string, then mixed with the master and indices.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : purpose) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = splitmix(master ^ splitmix(h));
  for (std::uint64_t i : indices) s = splitmix(s ^ splitmix(i + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace rclab::num
