#include "rclab/data/cache.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>

#include "json.hpp"
#include "rclab/num/rng.hpp"
#include "rclab/util/binary_io.hpp"
#include "rclab/util/digest.hpp"

namespace rclab::data {

using nlohmann::json;

GenerationCache generate_cache(const diffusion::DenoiserModel& teacher, std::string teacher_digest,
                               std::span<const Condition> conditions, std::size_t per_condition,
                               const diffusion::SamplerConfig& sampler, const diffusion::NoiseSchedule& sched,
                               std::uint64_t master_seed) {
  GenerationCache cache;
  cache.item_shape = teacher.spec.input_shape;
  cache.sampler = sampler;
  cache.teacher_digest = std::move(teacher_digest);
  std::vector<Condition> conds;
  std::vector<std::uint64_t> seeds;
  // Round-robin over conditions so prefixes stay balanced.
  for (std::size_t k = 0; k < per_condition; ++k) {
    for (std::size_t i = 0; i < conditions.size(); ++i) {
      conds.push_back(conditions[i]);
      seeds.push_back(num::derive_seed(master_seed, "cache", {i, k}));
    }
  }
  if (conds.empty()) return cache;
  const auto images = diffusion::sample(teacher, conds, seeds, sampler, sched);
  const std::size_t n = teacher.spec.input_size();
  const std::string digest = diffusion::sampler_digest(sampler);
  for (std::size_t e = 0; e < conds.size(); ++e) {
    cache.entries.push_back({std::vector<float>(images.ptr() + e * n, images.ptr() + (e + 1) * n), conds[e], seeds[e],
                             digest});
  }
  return cache;
}

void cache_write(const GenerationCache& cache, const std::filesystem::path& path) {
  if (cache.entries.empty()) throw ArgumentError("refusing to write an empty generation cache");
  const std::size_t n = num::shape_size(cache.item_shape);
  std::vector<unsigned char> payload;
  payload.reserve(cache.entries.size() * n * 4);
  json table = json::array();
  for (const auto& e : cache.entries) {
    if (e.image.size() != n) throw ShapeError("cache entry size does not match item shape");
    table.push_back({{"condition", e.condition},
                     {"seed", e.seed},
                     {"offset", payload.size()},
                     {"sampler_digest", e.sampler_digest}});
    util::append_f32_le(payload, e.image);
  }
  json header{{"version", kCacheVersion},
              {"item_shape", cache.item_shape},
              {"sampler", cache.sampler},
              {"sampler_digest", diffusion::sampler_digest(cache.sampler)},
              {"teacher_digest", cache.teacher_digest},
              {"payload_sha256", util::sha256_hex(payload)},
              {"entries", std::move(table)}};
  util::write_container(path, std::string_view(kCacheMagic, 8), header.dump(), payload);
}

GenerationCache cache_read(const std::filesystem::path& path) {
  const auto c = util::read_container(path, std::string_view(kCacheMagic, 8));
  json header;
  try {
    header = json::parse(c.header);
  } catch (const json::exception& e) {
    throw FormatError("cache header is not valid JSON: " + std::string(e.what()));
  }
  if (!header.contains("version") || header["version"] != kCacheVersion) {
    throw FormatError("unsupported cache version " + (header.contains("version") ? header["version"].dump() : "?"));
  }
  if (util::sha256_hex(c.payload) != header.at("payload_sha256").get<std::string>()) {
    throw CorruptionError("cache payload digest mismatch in '" + path.string() + "'");
  }
  GenerationCache cache;
  cache.item_shape = header.at("item_shape").get<Shape>();
  cache.sampler = header.at("sampler").get<diffusion::SamplerConfig>();
  cache.teacher_digest = header.at("teacher_digest").get<std::string>();
  if (diffusion::sampler_digest(cache.sampler) != header.at("sampler_digest").get<std::string>()) {
    throw CorruptionError("cache sampler digest does not match its sampler configuration");
  }
  const std::size_t n = num::shape_size(cache.item_shape);
  for (const auto& e : header.at("entries")) {
    const std::size_t off = e.at("offset").get<std::size_t>();
    if (off + n * 4 > c.payload.size()) throw CorruptionError("cache entry offset beyond payload");
    CacheEntry entry;
    entry.image = util::parse_f32_le(std::span(c.payload).subspan(off, n * 4));
    entry.condition = e.at("condition").get<Condition>();
    entry.seed = e.at("seed").get<std::uint64_t>();
    entry.sampler_digest = e.at("sampler_digest").get<std::string>();
    cache.entries.push_back(std::move(entry));
  }
  return cache;
}

std::size_t verify_cache(const GenerationCache& cache, const diffusion::DenoiserModel& teacher,
                         const diffusion::NoiseSchedule& sched, double fraction, std::uint64_t seed) {
  if (cache.entries.empty()) return 0;
  const std::size_t count =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * double(cache.size()))), 1, cache.size());
  num::Rng rng(seed, "cache-verify");
  std::vector<std::size_t> idx(cache.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  idx.resize(count);
  std::vector<Condition> conds;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i : idx) {
    conds.push_back(cache.entries[i].condition);
    seeds.push_back(cache.entries[i].seed);
  }
  const auto images = diffusion::sample(teacher, conds, seeds, cache.sampler, sched);
  const std::size_t n = num::shape_size(cache.item_shape);
  std::size_t mismatches = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& ref = cache.entries[idx[k]].image;
    if (std::memcmp(ref.data(), images.ptr() + k * n, n * sizeof(float)) != 0) ++mismatches;
  }
  return mismatches;
}

PairedDataset cache_to_dataset(const GenerationCache& cache) {
  PairedDataset d;
  d.item_shape = cache.item_shape;
  d.provenance = Provenance::Generated;
  for (const auto& e : cache.entries) d.push_back(e.image, e.condition);
  return d;
}

GenerationCache cache_prefix(const GenerationCache& cache, double fraction) {
  GenerationCache out = cache;
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * double(cache.size())));
  out.entries.resize(std::min(keep, cache.size()));
  return out;
}

}  // namespace rclab::data
