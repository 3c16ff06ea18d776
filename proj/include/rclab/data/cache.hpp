#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rclab/data/dataset.hpp"
#include "rclab/diffusion/sampler.hpp"

namespace rclab::data {

inline constexpr char kCacheMagic[] = "RCCACHE1";
inline constexpr int kCacheVersion = 1;

struct CacheEntry {
  std::vector<float> image;
  Condition condition;
  std::uint64_t seed = 0;
  std::string sampler_digest;
};

// Teacher generations stored ahead of distillation. Each entry is
// reproducible from (teacher, condition, seed, sampler).
struct GenerationCache {
  Shape item_shape;
  diffusion::SamplerConfig sampler;
  std::string teacher_digest;
  std::vector<CacheEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
};

// Samples one image per (condition, seed) where seed k of condition i is
// derive_seed(master_seed, "cache", {i, k}).
GenerationCache generate_cache(const diffusion::DenoiserModel& teacher, std::string teacher_digest,
                               std::span<const Condition> conditions, std::size_t per_condition,
                               const diffusion::SamplerConfig& sampler, const diffusion::NoiseSchedule& sched,
                               std::uint64_t master_seed);

// RCCACHE1 | u32 LE header length | JSON header | LE float32 payload.
void cache_write(const GenerationCache& cache, const std::filesystem::path& path);
GenerationCache cache_read(const std::filesystem::path& path);

// Re-samples `fraction` of the entries (at least one) against the teacher and
// returns how many differ bit-wise from the stored images.
std::size_t verify_cache(const GenerationCache& cache, const diffusion::DenoiserModel& teacher,
                         const diffusion::NoiseSchedule& sched, double fraction, std::uint64_t seed);

PairedDataset cache_to_dataset(const GenerationCache& cache);

// Keeps the first ceil(fraction * size) entries, preserving condition
// interleaving of generate_cache.
GenerationCache cache_prefix(const GenerationCache& cache, double fraction);

}  // namespace rclab::data
